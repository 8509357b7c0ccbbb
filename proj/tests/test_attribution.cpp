#include <doctest.h>

#include <symattack/attribution.hpp>
#include <symattack/rng.hpp>
#include <symattack/symmetry.hpp>

#include <cmath>

using namespace symattack;

namespace {

MlpModel linear_model(const Vector& c, double b0) {
    MlpModel m;
    Layer l;
    l.w = c.transpose();
    l.b = Vector::Constant(1, b0);
    l.activation = Activation::Identity;
    m.layers = {l};
    return m;
}

MlpModel random_net(std::vector<int> dims, uint64_t seed) {
    MlpModel m = make_classifier(dims, seed);
    m.layers.back().activation = Activation::Identity;
    Rng rng(seed + 500);
    for (Layer& l : m.layers) l.b = gaussian_vector(l.b.size(), rng) * 0.2;
    return m;
}

}  // namespace

TEST_CASE("integrated gradients on a linear model recover the closed form") {
    Rng rng(1);
    Vector c = gaussian_vector(5, rng);
    MlpModel m = linear_model(c, 0.7);
    ScalarHead head{m, 0};
    Vector x = gaussian_vector(5, rng);
    Vector xb = gaussian_vector(5, rng);
    AttributionVector ig = integrated_gradients(head, x, xb, 64);
    CHECK(ig.method == "ig");
    CHECK(ig.basis_tag == "standard");
    Vector want = (x - xb).cwiseProduct(c);
    CHECK((ig.values - want).cwiseAbs().maxCoeff() < 1e-13);
    // completeness is exact here
    CHECK(ig.values.sum() ==
          doctest::Approx(head_value(head, x) - head_value(head, xb)).epsilon(1e-12));
}

TEST_CASE("integrated gradients handle a coincident baseline and bad input") {
    Rng rng(2);
    Vector c = gaussian_vector(3, rng);
    MlpModel m = linear_model(c, 0.0);
    ScalarHead head{m, 0};
    Vector x = gaussian_vector(3, rng);
    AttributionVector ig = integrated_gradients(head, x, x, 16);
    CHECK(ig.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(integrated_gradients(head, x, Vector::Zero(2), 16), DimensionError);
    CHECK_THROWS_AS(integrated_gradients(head, x, x, 0), DimensionError);
}

TEST_CASE("quadrature nodes bracket every activation crossing") {
    // F(x) = relu(x - 1/2) in one dimension: single crossing at t = 1/2
    MlpModel m;
    Layer l0;
    l0.w = Matrix::Constant(1, 1, 1.0);
    l0.b = Vector::Constant(1, -0.5);
    l0.activation = Activation::Relu;
    Layer l1;
    l1.w = Matrix::Constant(1, 1, 1.0);
    l1.b = Vector::Zero(1);
    l1.activation = Activation::Identity;
    m.layers = {l0, l1};

    Vector x0 = Vector::Zero(1);
    Vector x1 = Vector::Ones(1);
    auto nodes = quadrature_nodes(m, x0, x1, 10);
    CHECK(std::is_sorted(nodes.begin(), nodes.end()));
    CHECK(nodes.front() == 0.0);
    CHECK(nodes.back() == 1.0);
    bool below = false, above = false;
    for (double t : nodes) {
        if (std::abs(t - (0.5 - 1e-9)) < 1e-15) below = true;
        if (std::abs(t - (0.5 + 1e-9)) < 1e-15) above = true;
    }
    CHECK(below);
    CHECK(above);

    // the integral of the kinked function is then nailed by the trapezoid rule
    ScalarHead head{m, 0};
    AttributionVector ig = integrated_gradients(head, x1, x0, 10);
    CHECK(ig.values(0) == doctest::Approx(0.5).epsilon(1e-8));

    // a linear model produces no extra nodes
    Rng rng(3);
    Vector c = gaussian_vector(2, rng);
    MlpModel lin = linear_model(c, 0.0);
    auto plain = quadrature_nodes(lin, Vector::Zero(2), Vector::Ones(2), 7);
    CHECK(plain.size() == 8);
}

TEST_CASE("integrated gradients satisfy completeness on random relu nets") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        MlpModel m = random_net({6, 10, 8, 3}, 40 + seed);
        ScalarHead head{m, static_cast<int>(seed % 3)};
        Rng rng(seed);
        Vector x = gaussian_vector(6, rng);
        Vector xb = gaussian_vector(6, rng);
        AttributionVector ig = integrated_gradients(head, x, xb, 256);
        const double df = head_value(head, x) - head_value(head, xb);
        CHECK(std::abs(ig.values.sum() - df) < 1e-8 * (1.0 + std::abs(df)));
    }
}

TEST_CASE("directional path attribution matches component attributions") {
    MlpModel m = random_net({5, 9, 2}, 91);
    ScalarHead head{m, 1};
    Rng rng(6);
    Vector x = gaussian_vector(5, rng);
    Vector xb = gaussian_vector(5, rng);
    AttributionVector ig = integrated_gradients(head, x, xb, 128);
    PathSpec line = PathSpec::straight_line(xb, x, 128);
    for (Eigen::Index i = 0; i < 5; ++i) {
        Vector e = Vector::Zero(5);
        e(i) = 1.0;
        CHECK(path_attribution(head, line, e) == doctest::Approx(ig.values(i)).epsilon(1e-10));
    }
    Vector not_unit = Vector::Constant(5, 0.5);
    CHECK_THROWS_AS(path_attribution(head, line, not_unit), DimensionError);
}

TEST_CASE("sampled paths on a linear model depend only on the endpoints") {
    Rng rng(7);
    Vector c = gaussian_vector(3, rng);
    MlpModel m = linear_model(c, -0.2);
    ScalarHead head{m, 0};
    Vector v = gaussian_vector(3, rng).normalized();

    std::vector<Vector> wiggly;
    const int n = 41;
    Vector a = gaussian_vector(3, rng), b = gaussian_vector(3, rng);
    for (int j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) / (n - 1);
        Vector p = a + t * (b - a);
        p(0) += 0.3 * std::sin(6.0 * t) * t * (1.0 - t);  // detour, same endpoints
        p(2) -= 0.2 * t * t * (1.0 - t);
        wiggly.push_back(p);
    }
    const double got = path_attribution(head, PathSpec::sampled(wiggly), v);
    const double want = c.dot(v) * (b - a).dot(v);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK_THROWS_AS(PathSpec::sampled({a}), DimensionError);
}

TEST_CASE("conductance on an all-linear split multiplies through") {
    // h = W1 x + b1 (identity), f = w2 . h : A_ij = (x_i - x'_i) w2_j W1_ji
    Rng rng(8);
    Matrix w1 = gaussian_matrix(3, 4, rng);
    Vector b1 = gaussian_vector(3, rng);
    Vector w2 = gaussian_vector(3, rng);
    MlpModel m;
    Layer l0{w1, b1, Activation::Identity};
    Layer l1{w2.transpose(), Vector::Zero(1), Activation::Identity};
    m.layers = {l0, l1};
    ModelSplit s = split(m, 1);
    Vector x = gaussian_vector(4, rng);
    Vector xb = gaussian_vector(4, rng);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = (x(i) - xb(i)) * w2(j) * w1(j, i);
            CHECK(conductance_ij(s, 0, x, xb, i, j, 32) == doctest::Approx(want).epsilon(1e-12));
        }
    CHECK_THROWS_AS(conductance_ij(s, 0, x, xb, 9, 0, 32), DimensionError);
    CHECK_THROWS_AS(conductance_ij(s, 0, x, xb, 0, 7, 32), DimensionError);
}

TEST_CASE("summing conductance over inputs matches the hidden direction integral") {
    MlpModel m = random_net({5, 7, 6, 2}, 123);
    ModelSplit s = split(m, 1);
    Rng rng(9);
    Vector x = gaussian_vector(5, rng);
    Vector xb = gaussian_vector(5, rng);
    for (int j = 0; j < 7; ++j) {
        double total = 0.0;
        for (int i = 0; i < 5; ++i) total += conductance_ij(s, 0, x, xb, i, j, 200);
        Vector ej = Vector::Zero(7);
        ej(j) = 1.0;
        const double direct = conductance_direction(s, 0, x, xb, ej, 200);
        CHECK(total == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("conductance over the hidden basis sums to the output difference") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        MlpModel m = random_net({4, 8, 5, 2}, 300 + seed);
        Rng rng(seed);
        Vector x = gaussian_vector(4, rng);
        Vector xb = gaussian_vector(4, rng);
        for (int j : {1, 2}) {
            ModelSplit s = split(m, j);
            AttributionVector cv = conductance_vector(s, 1, x, xb, 256);
            CHECK(cv.method == "conductance");
            CHECK(cv.basis_tag == "hidden");
            ScalarHead head{m, 1};
            const double df = head_value(head, x) - head_value(head, xb);
            CHECK(cv.values.sum() == doctest::Approx(df).epsilon(1e-6));
        }
    }
}

TEST_CASE("smoothgrad with zero covariance is the plain gradient") {
    MlpModel m = random_net({4, 6, 2}, 17);
    ScalarHead head{m, 0};
    Rng rng(10);
    Vector x = gaussian_vector(4, rng);
    CovarianceSpec cov;
    cov.sigma = Matrix::Zero(4, 4);
    cov.sample_count = 5;
    cov.seed = 3;
    AttributionVector sg = smoothgrad(head, x, cov);
    CHECK(sg.method == "sg");
    CHECK(sg.sample_count == 5);
    CHECK((sg.values - gradient(head, x)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(sg.stderrs.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("smoothgrad on a linear model is the coefficient vector for any noise") {
    Rng rng(11);
    Vector c = gaussian_vector(4, rng);
    MlpModel m = linear_model(c, 1.0);
    CovarianceSpec cov = CovarianceSpec::isotropic(4, 0.5, 64, 99);
    CHECK((cov.sigma - 0.5 * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
    AttributionVector sg = smoothgrad({m, 0}, gaussian_vector(4, rng), cov);
    CHECK((sg.values - c).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(sg.stderrs.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("smoothgrad draws are seeded, reproducible and match the covariance") {
    CovarianceSpec cov;
    cov.sigma.resize(2, 2);
    cov.sigma << 0.3, 0.1,
                 0.1, 0.2;
    cov.sample_count = 40000;
    cov.seed = 1234;
    Matrix d1 = smoothgrad_draws(cov, 2);
    Matrix d2 = smoothgrad_draws(cov, 2);
    CHECK((d1 - d2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(d1.cols() == 40000);
    Vector mean = d1.rowwise().mean();
    CHECK(mean.cwiseAbs().maxCoeff() < 0.01);
    Matrix centered = d1.colwise() - mean;
    Matrix cov_emp = centered * centered.transpose() / static_cast<double>(d1.cols() - 1);
    CHECK((cov_emp - cov.sigma).cwiseAbs().maxCoeff() < 0.01);

    CovarianceSpec bad = cov;
    bad.sample_count = 0;
    CHECK_THROWS_AS(smoothgrad_draws(bad, 2), DimensionError);
    CovarianceSpec asym = cov;
    asym.sigma(0, 1) = 0.9;
    CHECK_THROWS_AS(smoothgrad_draws(asym, 2), DimensionError);
    CovarianceSpec indef = cov;
    indef.sigma << 1.0, 0.0,
                   0.0, -1.0;
    CHECK_THROWS_AS(smoothgrad_draws(indef, 2), DimensionError);
}

TEST_CASE("smoothgrad transforms equivariantly under shared rotated draws") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        MlpModel m = random_net({5, 8, 4, 2}, 600 + seed);
        ScalarHead head{m, static_cast<int>(seed % 2)};
        Rng rng(seed);
        Vector x = gaussian_vector(5, rng);
        CovarianceSpec cov = CovarianceSpec::isotropic(5, 0.01, 200, 7 + seed);
        Matrix draws = smoothgrad_draws(cov, 5);
        AttributionVector base = smoothgrad_with_draws(head, x, draws);

        GroupElement g{random_orthogonal(5, seed + 50), gaussian_vector(5, rng)};
        MlpModel tm = transform_model(m, g);
        ScalarHead thead{tm, head.class_index};
        AttributionVector moved =
            smoothgrad_with_draws(thead, act(g, x), (g.linear * draws).eval());
        // gradient of x -> F(g^-1(x)) is Q^-T grad = Q grad for orthogonal Q
        CHECK((moved.values - g.linear * base.values).cwiseAbs().maxCoeff() <
              1e-10 * std::max(1.0, base.values.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("clime on a linear model recovers the slope exactly") {
    Rng rng(12);
    Vector c = gaussian_vector(4, rng);
    MlpModel m = linear_model(c, -0.3);
    CovarianceSpec cov = CovarianceSpec::isotropic(4, 0.2, 40, 5);
    AttributionVector s = clime({m, 0}, gaussian_vector(4, rng), cov);
    CHECK(s.method == "clime");
    CHECK((s.values - c).cwiseAbs().maxCoeff() < 1e-10);
    // the fit is exact, so the reported slope standard errors collapse
    CHECK(s.stderrs.size() == 4);
    CHECK(s.stderrs.maxCoeff() < 1e-8);
}

TEST_CASE("clime validates its design") {
    MlpModel m = random_net({4, 6, 1}, 77);
    ScalarHead head{m, 0};
    Vector x = Vector::Zero(4);
    CovarianceSpec few = CovarianceSpec::isotropic(4, 0.1, 5, 1);  // below n + 2
    CHECK_THROWS_AS(clime(head, x, few), DimensionError);
    CovarianceSpec singular = CovarianceSpec::isotropic(4, 0.0, 40, 1);
    CHECK_THROWS_AS(clime(head, x, singular), DimensionError);
}

TEST_CASE("clime slopes sit inside the smoothgrad confidence band") {
    MlpModel m = random_net({4, 8, 1}, 5150);
    ScalarHead head{m, 0};
    Rng rng(13);
    Vector x = gaussian_vector(4, rng);
    CovarianceSpec sg_cov = CovarianceSpec::isotropic(4, 0.01, 5000, 101);
    CovarianceSpec cl_cov = CovarianceSpec::isotropic(4, 0.01, 5000, 202);  // independent draws
    AttributionVector sg = smoothgrad(head, x, sg_cov);
    AttributionVector cl = clime(head, x, cl_cov);
    // independent estimators of the same population quantity: compare against
    // the standard error of the difference
    for (Eigen::Index i = 0; i < 4; ++i) {
        const double band = 5.0 * std::hypot(sg.stderrs(i), cl.stderrs(i)) + 1e-12;
        CHECK(std::abs(cl.values(i) - sg.values(i)) <= band);
    }
}
