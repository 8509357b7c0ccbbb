#include "symattack/model.hpp"

#include <fstream>

#include <json.hpp>

#include "symattack/rng.hpp"
#include "symattack/symmetry.hpp"

namespace symattack {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
        case Activation::Softmax: return "softmax";
    }
    throw ConfigError("unknown activation tag");
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "identity") return Activation::Identity;
    if (name == "softmax") return Activation::Softmax;
    throw ParseError("unknown activation name: " + name);
}

void MlpModel::validate() const {
    if (layers.empty()) throw DimensionError("model has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        if (l.w.rows() != l.b.size())
            throw DimensionError("layer bias length does not match rows");
        if (!all_finite(l.w) || !all_finite(l.b))
            throw ParseError("non-finite layer weights");
        if (i + 1 < layers.size()) {
            if (layers[i + 1].w.cols() != l.w.rows())
                throw DimensionError("layer shapes do not chain");
            if (l.activation == Activation::Softmax)
                throw DimensionError("softmax is only permitted on the final layer");
        }
    }
}

static Vector softmax(const Vector& z) {
    const Vector e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

Vector forward(const MlpModel& m, const Vector& x, bool probabilities) {
    if (x.size() != m.input_dim()) throw DimensionError("forward: input dim mismatch");
    Vector z = x;
    for (const Layer& l : m.layers) {
        z = (l.w * z + l.b).eval();
        if (l.activation == Activation::Relu) z = z.cwiseMax(0.0);
    }
    if (probabilities && m.layers.back().activation == Activation::Softmax)
        z = softmax(z);
    return z;
}

Matrix forward_batch(const MlpModel& m, const Matrix& x_cols) {
    if (x_cols.rows() != m.input_dim()) throw DimensionError("forward_batch: input dim mismatch");
    Matrix z = x_cols;
    for (const Layer& l : m.layers) {
        z = ((l.w * z).colwise() + l.b).eval();
        if (l.activation == Activation::Relu) z = z.cwiseMax(0.0);
    }
    return z;
}

std::vector<Vector> preactivations(const MlpModel& m, const Vector& x) {
    std::vector<Vector> pre;
    pre.reserve(m.layers.size());
    Vector z = x;
    for (const Layer& l : m.layers) {
        pre.push_back(l.w * z + l.b);
        z = pre.back();
        if (l.activation == Activation::Relu) z = z.cwiseMax(0.0);
    }
    return pre;
}

double head_value(const ScalarHead& head, const Vector& x) {
    if (head.class_index < 0 || head.class_index >= head.model.output_dim())
        throw DimensionError("head class index out of range");
    return forward(head.model, x)(head.class_index);
}

Vector vjp(const MlpModel& m, const Vector& x, const Vector& cotangent) {
    if (cotangent.size() != m.output_dim()) throw DimensionError("vjp: cotangent dim mismatch");
    const std::vector<Vector> pre = preactivations(m, x);
    Vector g = cotangent;
    for (int l = static_cast<int>(m.layers.size()) - 1; l >= 0; --l) {
        if (m.layers[l].activation == Activation::Relu)
            g = (pre[l].array() > 0.0).select(g, 0.0).eval();
        g = (m.layers[l].w.transpose() * g).eval();
    }
    return g;
}

Vector gradient(const ScalarHead& head, const Vector& x) {
    Vector e = Vector::Zero(head.model.output_dim());
    if (head.class_index < 0 || head.class_index >= head.model.output_dim())
        throw DimensionError("head class index out of range");
    e(head.class_index) = 1.0;
    return vjp(head.model, x, e);
}

ModelSplit split(const MlpModel& m, int j) {
    if (j < 1 || j >= static_cast<int>(m.layers.size()))
        throw DimensionError("split index out of range");
    ModelSplit s;
    s.split_index = j;
    s.h.layers.assign(m.layers.begin(), m.layers.begin() + j);
    s.f.layers.assign(m.layers.begin() + j, m.layers.end());
    return s;
}

double lipschitz_bound(const ScalarHead& head) {
    const MlpModel& m = head.model;
    double bound = 1.0;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const Layer& l = m.layers[i];
        if (l.activation == Activation::Softmax && i + 1 < m.layers.size())
            throw DimensionError("softmax-tagged intermediate layer");
        if (i + 1 == m.layers.size())
            bound *= l.w.row(head.class_index).norm();
        else
            bound *= spectral_norm(l.w);
    }
    return bound;
}

MlpModel transform_model(const MlpModel& m, const GroupElement& g) {
    if (g.linear.rows() != m.input_dim())
        throw DimensionError("transform_model: group element dim mismatch");
    Eigen::FullPivLU<Matrix> lu(g.linear);
    if (!lu.isInvertible()) throw DegenerateGeneratorError("transform_model: singular linear part");
    const Matrix qinv = lu.inverse();
    MlpModel out = m;
    out.layers.front().w = m.layers.front().w * qinv;
    out.layers.front().b = m.layers.front().b - m.layers.front().w * (qinv * g.translation);
    return out;
}

MlpModel make_classifier(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw DimensionError("make_classifier: need at least input and output dims");
    Rng rng(seed);
    MlpModel m;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer l;
        const double sd = std::sqrt(2.0 / dims[i]);
        l.w = gaussian_matrix(dims[i + 1], dims[i], rng) * sd;
        l.b = Vector::Zero(dims[i + 1]);
        l.activation = (i + 2 == dims.size()) ? Activation::Softmax : Activation::Relu;
        m.layers.push_back(std::move(l));
    }
    return m;
}

static Matrix softmax_cols(const Matrix& z) {
    Matrix p = z;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        Vector col = p.col(c);
        p.col(c) = softmax(col);
    }
    return p;
}

double accuracy(const MlpModel& m, const Matrix& x_cols, const std::vector<int>& y) {
    const Matrix logits = forward_batch(m, x_cols);
    int hits = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        Eigen::Index pred;
        logits.col(c).maxCoeff(&pred);
        if (pred == y[static_cast<std::size_t>(c)]) ++hits;
    }
    return logits.cols() > 0 ? static_cast<double>(hits) / logits.cols() : 0.0;
}

double macro_f1(const MlpModel& m, const Matrix& x_cols, const std::vector<int>& y) {
    const Matrix logits = forward_batch(m, x_cols);
    const int classes = static_cast<int>(m.output_dim());
    std::vector<int> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        Eigen::Index pred;
        logits.col(c).maxCoeff(&pred);
        const int truth = y[static_cast<std::size_t>(c)];
        if (pred == truth) ++tp[truth];
        else {
            ++fp[pred];
            ++fn[truth];
        }
    }
    double f1_sum = 0.0;
    for (int k = 0; k < classes; ++k) {
        const double denom = 2.0 * tp[k] + fp[k] + fn[k];
        f1_sum += denom > 0 ? 2.0 * tp[k] / denom : 0.0;
    }
    return f1_sum / classes;
}

TrainMetrics train(MlpModel& m, const Matrix& x_train, const std::vector<int>& y_train,
                   const Matrix& x_test, const std::vector<int>& y_test,
                   const Hyperparams& hp) {
    m.validate();
    if (x_train.cols() == 0) throw DimensionError("train: empty dataset");
    if (x_train.rows() != m.input_dim()) throw DimensionError("train: feature dim mismatch");
    if (m.layers.back().activation != Activation::Softmax)
        throw ConfigError("train: classifier requires a softmax-tagged final layer");
    const int classes = static_cast<int>(m.output_dim());
    for (int label : y_train)
        if (label < 0 || label >= classes) throw DimensionError("train: label out of range");

    const int ntr = static_cast<int>(x_train.cols());
    const std::size_t nlayers = m.layers.size();
    std::vector<Matrix> vel_w(nlayers);
    std::vector<Vector> vel_b(nlayers);
    for (std::size_t l = 0; l < nlayers; ++l) {
        vel_w[l] = Matrix::Zero(m.layers[l].w.rows(), m.layers[l].w.cols());
        vel_b[l] = Vector::Zero(m.layers[l].b.size());
    }

    Rng rng(hp.seed);
    std::vector<Matrix> pre(nlayers), act(nlayers);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const std::vector<int> order = permutation(ntr, rng);
        for (int start = 0; start < ntr; start += hp.batch) {
            const int bsz = std::min(hp.batch, ntr - start);
            Matrix xb(x_train.rows(), bsz);
            for (int i = 0; i < bsz; ++i) xb.col(i) = x_train.col(order[start + i]);

            Matrix z = xb;
            for (std::size_t l = 0; l < nlayers; ++l) {
                pre[l] = (m.layers[l].w * z).colwise() + m.layers[l].b;
                z = m.layers[l].activation == Activation::Relu ? pre[l].cwiseMax(0.0) : pre[l];
                act[l] = z;
            }

            Matrix g = softmax_cols(pre[nlayers - 1]);
            for (int i = 0; i < bsz; ++i) g(y_train[order[start + i]], i) -= 1.0;
            g /= bsz;

            for (int l = static_cast<int>(nlayers) - 1; l >= 0; --l) {
                const Matrix& input = l == 0 ? xb : act[l - 1];
                const Matrix dw = g * input.transpose();
                const Vector db = g.rowwise().sum();
                if (l > 0) {
                    g = (m.layers[l].w.transpose() * g).eval();
                    if (m.layers[l - 1].activation == Activation::Relu)
                        g = (pre[l - 1].array() > 0.0).select(g, 0.0).eval();
                }
                vel_w[l] = hp.momentum * vel_w[l] - hp.lr * dw;
                vel_b[l] = hp.momentum * vel_b[l] - hp.lr * db;
                m.layers[l].w += vel_w[l];
                m.layers[l].b += vel_b[l];
            }
        }
    }

    TrainMetrics metrics;
    metrics.train_accuracy = accuracy(m, x_train, y_train);
    metrics.train_macro_f1 = macro_f1(m, x_train, y_train);
    if (x_test.cols() > 0) {
        metrics.test_accuracy = accuracy(m, x_test, y_test);
        metrics.test_macro_f1 = macro_f1(m, x_test, y_test);
    }
    return metrics;
}

void save_model(const MlpModel& m, const std::string& path) {
    m.validate();
    nlohmann::json doc;
    doc["version"] = 1;
    auto& acts = doc["activations"] = nlohmann::json::array();
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (const Layer& l : m.layers) {
        acts.push_back(activation_name(l.activation));
        nlohmann::json jl;
        jl["rows"] = l.w.rows();
        jl["cols"] = l.w.cols();
        std::vector<double> w(static_cast<std::size_t>(l.w.size()));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c)
                w[static_cast<std::size_t>(r * l.w.cols() + c)] = l.w(r, c);
        jl["w"] = w;
        jl["b"] = std::vector<double>(l.b.data(), l.b.data() + l.b.size());
        layers.push_back(std::move(jl));
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open model file for writing: " + path);
    out << doc.dump();  // doubles emitted as shortest round-trip decimals
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model file: ") + e.what());
    }
    if (!doc.contains("version") || !doc["version"].is_number_integer())
        throw ParseError("model file missing version field");
    if (doc["version"].get<int>() != 1)
        throw UnsupportedVersionError("unsupported model file version " +
                                      std::to_string(doc["version"].get<int>()));
    if (!doc.contains("layers") || !doc.contains("activations"))
        throw ParseError("model file missing layers or activations");
    const auto& acts = doc["activations"];
    const auto& layers = doc["layers"];
    if (acts.size() != layers.size()) throw ParseError("activations and layers counts differ");
    MlpModel m;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& jl = layers[i];
        Layer l;
        l.activation = activation_from_name(acts[i].get<std::string>());
        const Eigen::Index rows = jl.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = jl.at("cols").get<Eigen::Index>();
        const auto w = jl.at("w").get<std::vector<double>>();
        const auto b = jl.at("b").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
            static_cast<Eigen::Index>(b.size()) != rows)
            throw ParseError("layer shape inconsistent with data length");
        l.w.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                l.w(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        l.b = Eigen::Map<const Vector>(b.data(), rows);
        m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
}

}  // namespace symattack
