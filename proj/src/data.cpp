#include "symattack/data.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "symattack/rng.hpp"

namespace symattack {

Vector Dataset::point(int index) const {
    return (features.row(index).transpose() - shift).cwiseQuotient(scale);
}

static Matrix gather(const Dataset& ds, const std::vector<int>& idx) {
    Matrix m(ds.feature_count(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = ds.point(idx[i]);
    return m;
}

static std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.labels[static_cast<std::size_t>(i)]);
    return out;
}

Matrix Dataset::train_matrix() const { return gather(*this, train_indices); }
Matrix Dataset::test_matrix() const { return gather(*this, test_indices); }
std::vector<int> Dataset::train_labels() const { return gather_labels(*this, train_indices); }
std::vector<int> Dataset::test_labels() const { return gather_labels(*this, test_indices); }

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw ParseError("truncated IDX header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw ParseError("cannot open IDX image file: " + images_path);
    if (read_be32(img, images_path) != 0x00000803u)
        throw ParseError("bad IDX image magic in " + images_path + " (expected 0x00000803)");
    const std::uint32_t count = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    const std::size_t pixel_bytes = std::size_t(count) * rows * cols;
    std::vector<unsigned char> pixels(pixel_bytes);
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixel_bytes)))
        throw ParseError("truncated IDX image file " + images_path + ": expected " +
                         std::to_string(pixel_bytes + 16) + " bytes");

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw ParseError("cannot open IDX label file: " + labels_path);
    if (read_be32(lab, labels_path) != 0x00000801u)
        throw ParseError("bad IDX label magic in " + labels_path + " (expected 0x00000801)");
    const std::uint32_t label_count = read_be32(lab, labels_path);
    if (label_count != count)
        throw ParseError("IDX image/label counts differ: " + std::to_string(count) + " vs " +
                         std::to_string(label_count));
    std::vector<unsigned char> raw_labels(label_count);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), label_count))
        throw ParseError("truncated IDX label file " + labels_path + ": expected " +
                         std::to_string(std::size_t(label_count) + 8) + " bytes");

    Dataset ds;
    ds.name = "mnist";
    const Eigen::Index dim = static_cast<Eigen::Index>(rows) * cols;
    ds.features.resize(count, dim);
    for (std::uint32_t s = 0; s < count; ++s)
        for (Eigen::Index p = 0; p < dim; ++p)
            ds.features(s, p) = pixels[std::size_t(s) * dim + std::size_t(p)] / 255.0;
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    ds.class_count = 10;
    ds.train_indices.resize(count);
    for (std::uint32_t s = 0; s < count; ++s) ds.train_indices[s] = static_cast<int>(s);
    ds.shift = Vector::Zero(dim);
    ds.scale = Vector::Ones(dim);
    return ds;
}

Dataset merge_train_test(const Dataset& train, const Dataset& test) {
    if (train.feature_count() != test.feature_count())
        throw DimensionError("merge_train_test: feature dims differ");
    Dataset ds;
    ds.name = train.name;
    ds.class_count = std::max(train.class_count, test.class_count);
    ds.features.resize(train.sample_count() + test.sample_count(), train.feature_count());
    ds.features.topRows(train.sample_count()) = train.features;
    ds.features.bottomRows(test.sample_count()) = test.features;
    ds.labels = train.labels;
    ds.labels.insert(ds.labels.end(), test.labels.begin(), test.labels.end());
    for (int i = 0; i < train.sample_count(); ++i) ds.train_indices.push_back(i);
    for (int i = 0; i < test.sample_count(); ++i)
        ds.test_indices.push_back(static_cast<int>(train.sample_count()) + i);
    ds.shift = train.shift;
    ds.scale = train.scale;
    return ds;
}

namespace {

void fit_zscore(Dataset& ds) {
    const Eigen::Index dim = ds.feature_count();
    Vector mean = Vector::Zero(dim);
    for (int i : ds.train_indices) mean += ds.features.row(i).transpose();
    mean /= static_cast<double>(ds.train_indices.size());
    Vector var = Vector::Zero(dim);
    for (int i : ds.train_indices) {
        const Vector d = ds.features.row(i).transpose() - mean;
        var += d.cwiseProduct(d);
    }
    var /= static_cast<double>(ds.train_indices.size());
    ds.shift = mean;
    ds.scale = var.cwiseSqrt().cwiseMax(1e-300);
    for (Eigen::Index j = 0; j < dim; ++j)
        if (ds.scale(j) < 1e-12) ds.scale(j) = 1.0;  // constant feature: leave centered
}

void seeded_split(Dataset& ds, double test_fraction, std::uint64_t seed) {
    const int n = static_cast<int>(ds.sample_count());
    if (n < 2) throw ParseError("dataset has fewer than 2 samples: cannot split");
    Rng rng(seed);
    const std::vector<int> perm = permutation(n, rng);
    int ntest = static_cast<int>(test_fraction * n + 0.5);
    ntest = std::max(1, std::min(ntest, n - 1));
    ds.train_indices.assign(perm.begin(), perm.end() - ntest);
    ds.test_indices.assign(perm.end() - ntest, perm.end());
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column, double test_fraction,
                 std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    int label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_col = static_cast<int>(i);
    if (label_col < 0) throw ParseError("label column '" + label_column + "' not found in " + path);

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            char* endp = nullptr;
            const double v = std::strtod(cell.c_str(), &endp);
            if (endp == cell.c_str() || *endp != '\0')
                throw ParseError("non-numeric cell '" + cell + "' at " + path + ":" +
                                 std::to_string(lineno));
            if (col == label_col)
                labels.push_back(static_cast<int>(v));
            else
                row.push_back(v);
            ++col;
        }
        if (col != static_cast<int>(header.size()))
            throw ParseError("ragged CSV row at " + path + ":" + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("CSV file has no data rows: " + path);

    Dataset ds;
    ds.name = path;
    ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    ds.labels = std::move(labels);
    int max_label = 0;
    for (int l : ds.labels) {
        if (l < 0) throw ParseError("negative label in " + path);
        max_label = std::max(max_label, l);
    }
    ds.class_count = max_label + 1;
    seeded_split(ds, test_fraction, seed);
    fit_zscore(ds);
    return ds;
}

Dataset make_synthetic_tabular(int samples, std::uint64_t seed) {
    constexpr int dim = 20;
    Rng rng(seed);
    // fixed anisotropic mixing and a class-mean offset of controlled length
    const Matrix mixing = Matrix::Identity(dim, dim) + 0.3 * gaussian_matrix(dim, dim, rng);
    Vector offset = gaussian_vector(dim, rng);
    offset *= 4.0 / offset.norm();

    Dataset ds;
    ds.name = "synthetic";
    ds.features.resize(samples, dim);
    ds.labels.resize(static_cast<std::size_t>(samples));
    ds.class_count = 2;
    for (int s = 0; s < samples; ++s) {
        const int label = rng.uniform() < 0.5 ? 0 : 1;
        Vector z = mixing * gaussian_vector(dim, rng);
        if (label == 1) z += offset;
        ds.features.row(s) = z.transpose();
        ds.labels[static_cast<std::size_t>(s)] = label;
    }
    seeded_split(ds, 0.2, seed);
    fit_zscore(ds);
    return ds;
}

TrainMetrics train(MlpModel& m, const Dataset& ds, const Hyperparams& hp) {
    return train(m, ds.train_matrix(), ds.train_labels(), ds.test_matrix(), ds.test_labels(), hp);
}

}  // namespace symattack
