#include "twinbench/shallow.hpp"

#include "twinbench/numkit.hpp"
#include "twinbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace twinbench::shallow {

namespace {

Prediction sign_prediction(Vector scores) {
    Prediction p;
    p.labels = scores.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    p.scores = std::move(scores);
    return p;
}

}  // namespace

// ---- KRR ----

KrrModel train_krr(const data::Dataset& ds, double lambda, const KernelSpec& k) {
    require(lambda >= 0.0 && std::isfinite(lambda), "train_krr: lambda must be finite and >= 0");
    require(ds.n() >= 1, "train_krr: empty dataset");
    Matrix a = kernels::gram(ds.x, ds.x, k);
    a.diagonal().array() += lambda;
    const numkit::SpdSolution s = numkit::solve_spd(a, ds.y);
    KrrModel m;
    m.coefficients = s.x;
    m.train_points = ds.x;
    m.kernel = k;
    m.lambda = lambda;
    m.ridge_fallback = s.ridge_fallback;
    return m;
}

Vector krr_decision(const KrrModel& m, const Matrix& x) {
    require_dims(x.cols() == m.train_points.cols(), "predict_krr: feature count mismatch");
    return kernels::gram(x, m.train_points, m.kernel) * m.coefficients;
}

Prediction predict_krr(const KrrModel& m, const Matrix& x) { return sign_prediction(krr_decision(m, x)); }

// ---- KNN ----

Prediction predict_knn(const data::Dataset& train, const Matrix& x, int k) {
    require(k >= 1 && k % 2 == 1, "predict_knn: k must be a positive odd number");
    require(static_cast<Index>(k) <= train.n(), "predict_knn: k exceeds the training size");
    require_dims(x.cols() == train.d(), "predict_knn: feature count mismatch");
    Prediction p;
    p.labels.resize(x.rows());
    p.scores.resize(x.rows());
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(train.n()));
    for (Index q = 0; q < x.rows(); ++q) {
        for (Index i = 0; i < train.n(); ++i)
            dist[static_cast<std::size_t>(i)] = {(train.x.row(i) - x.row(q)).squaredNorm(), i};
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        int pos = 0;
        for (int j = 0; j < k; ++j)
            if (train.y(dist[static_cast<std::size_t>(j)].second) > 0) ++pos;
        p.scores(q) = static_cast<double>(pos) / k;
        p.labels(q) = 2 * pos > k ? 1.0 : -1.0;
    }
    return p;
}

// ---- MLP ----

namespace {

struct Forward {
    Matrix z1, xhat, a, r, z2, prob;
    Vector mean, inv_std;
};

Matrix softmax_rows(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i) {
        const double mx = z.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (z.row(i).array() - mx).exp().matrix();
        out.row(i) = e / e.sum();
    }
    return out;
}

Forward forward(const MlpModel& m, const Matrix& x, bool training) {
    Forward f;
    f.z1 = (x * m.w1).rowwise() + m.b1.transpose();
    if (training) {
        f.mean = f.z1.colwise().mean().transpose();
        const Matrix c = f.z1.rowwise() - f.mean.transpose();
        const Vector var = c.colwise().squaredNorm().transpose() / static_cast<double>(x.rows());
        f.inv_std = (var.array() + m.bn_eps).rsqrt().matrix();
    } else {
        f.mean = m.running_mean;
        f.inv_std = (m.running_var.array() + m.bn_eps).rsqrt().matrix();
    }
    f.xhat = (f.z1.rowwise() - f.mean.transpose()) * f.inv_std.asDiagonal();
    f.a = (f.xhat * m.gamma.asDiagonal()).rowwise() + m.beta.transpose();
    f.r = f.a.cwiseMax(0.0);
    f.z2 = (f.r * m.w2).rowwise() + m.b2.transpose();
    f.prob = softmax_rows(f.z2);
    return f;
}

Matrix one_hot(const Vector& y) {
    Matrix t = Matrix::Zero(y.size(), 2);
    for (Index i = 0; i < y.size(); ++i) t(i, y(i) > 0 ? 1 : 0) = 1.0;
    return t;
}

double cross_entropy(const Matrix& prob, const Matrix& t) {
    const double tiny = 1e-300;
    return -(t.array() * (prob.array() + tiny).log()).sum() / static_cast<double>(prob.rows());
}

// Parameters in a fixed order: w1, b1, gamma, beta, w2, b2 (vectors as n x 1 matrices).
std::vector<Matrix*> parameters(MlpModel& m, std::vector<Matrix>& vec_buf) {
    vec_buf = {m.b1, m.gamma, m.beta, m.b2};
    return {&m.w1, &vec_buf[0], &vec_buf[1], &vec_buf[2], &m.w2, &vec_buf[3]};
}

}  // namespace

MlpModel train_mlp(const data::Dataset& ds, const MlpOptions& opt) {
    require(opt.hidden >= 1, "train_mlp: hidden must be >= 1");
    require(opt.epochs >= 1, "train_mlp: epochs must be >= 1");
    require(opt.lr > 0.0, "train_mlp: lr must be positive");
    require(opt.batch >= 2, "train_mlp: batch must be >= 2");
    require(ds.n() >= 4, "train_mlp: need at least 4 samples");

    Rng rng(derive_seed(opt.seed, "mlp"));
    std::vector<Index> order(static_cast<std::size_t>(ds.n()));
    std::iota(order.begin(), order.end(), Index{0});
    shuffle(order, rng);
    auto n_val = static_cast<Index>(std::llround(opt.validation_fraction * static_cast<double>(ds.n())));
    n_val = std::clamp<Index>(n_val, 0, ds.n() - 2);
    const std::vector<Index> val_rows(order.begin(), order.begin() + n_val);
    std::vector<Index> train_rows(order.begin() + n_val, order.end());

    const Matrix xv = take_rows(ds.x, val_rows);
    const Matrix tv = one_hot(take(ds.y, val_rows));
    const Index d = ds.d();
    const Index h = opt.hidden;

    MlpModel m;
    m.bn_eps = opt.bn_eps;
    m.w1.resize(d, h);
    for (Index i = 0; i < m.w1.size(); ++i) m.w1.data()[i] = normal(rng) * std::sqrt(2.0 / static_cast<double>(d));
    m.b1 = Vector::Zero(h);
    m.gamma = Vector::Ones(h);
    m.beta = Vector::Zero(h);
    m.running_mean = Vector::Zero(h);
    m.running_var = Vector::Ones(h);
    m.w2.resize(h, 2);
    for (Index i = 0; i < m.w2.size(); ++i) m.w2.data()[i] = normal(rng) * std::sqrt(1.0 / static_cast<double>(h));
    m.b2 = Vector::Zero(2);

    std::vector<Matrix> vec_buf;
    for (Matrix* p : parameters(m, vec_buf)) {
        m.adam.m.push_back(Matrix::Zero(p->rows(), p->cols()));
        m.adam.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    const double b1c = 0.9, b2c = 0.999, eps = 1e-8;

    MlpModel best = m;
    double best_val = std::numeric_limits<double>::infinity();
    const auto n_train = static_cast<Index>(train_rows.size());

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        shuffle(train_rows, rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (Index start = 0; start < n_train;) {
            Index stop = std::min(n_train, start + opt.batch);
            if (n_train - stop < 2) stop = n_train;  // no single-sample tail batch for batch norm
            const std::vector<Index> rows(train_rows.begin() + start, train_rows.begin() + stop);
            start = stop;
            const Matrix xb = take_rows(ds.x, rows);
            const Matrix tb = one_hot(take(ds.y, rows));
            const auto bsz = static_cast<double>(rows.size());

            const Forward f = forward(m, xb, true);
            const double loss = cross_entropy(f.prob, tb);
            if (!std::isfinite(loss)) {
                std::ostringstream os;
                os << "train_mlp: non-finite loss at epoch " << epoch << " batch " << batches
                   << " (max |w1| = " << m.w1.cwiseAbs().maxCoeff() << ")";
                throw Error(os.str());
            }
            loss_sum += loss;
            ++batches;

            const Matrix dz2 = (f.prob - tb) / bsz;
            const Matrix dw2 = f.r.transpose() * dz2;
            const Vector db2 = dz2.colwise().sum().transpose();
            const Matrix da = (dz2 * m.w2.transpose()).cwiseProduct((f.a.array() > 0.0).cast<double>().matrix());
            const Vector dgamma = da.cwiseProduct(f.xhat).colwise().sum().transpose();
            const Vector dbeta = da.colwise().sum().transpose();
            const Matrix dxhat = da * m.gamma.asDiagonal();
            const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
            const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(f.xhat).colwise().sum();
            Matrix dz1 = (bsz * dxhat).rowwise() - sum_dxhat;
            dz1 -= f.xhat * sum_dxhat_xhat.asDiagonal();
            dz1 = dz1 * (f.inv_std / bsz).asDiagonal();
            const Matrix dw1 = xb.transpose() * dz1;
            const Vector db1 = dz1.colwise().sum().transpose();

            // running statistics (unbiased variance, momentum on the new batch)
            const Vector batch_var = (f.inv_std.array().square().inverse() - m.bn_eps).matrix() * (bsz / (bsz - 1.0));
            m.running_mean = (1.0 - opt.bn_momentum) * m.running_mean + opt.bn_momentum * f.mean;
            m.running_var = (1.0 - opt.bn_momentum) * m.running_var + opt.bn_momentum * batch_var;

            const std::vector<Matrix> grads = {dw1, db1, dgamma, dbeta, dw2, db2};
            ++m.adam.step;
            const double c1 = 1.0 - std::pow(b1c, static_cast<double>(m.adam.step));
            const double c2 = 1.0 - std::pow(b2c, static_cast<double>(m.adam.step));
            std::vector<Matrix*> params = parameters(m, vec_buf);
            for (std::size_t i = 0; i < params.size(); ++i) {
                m.adam.m[i] = b1c * m.adam.m[i] + (1.0 - b1c) * grads[i];
                m.adam.v[i] = b2c * m.adam.v[i] + (1.0 - b2c) * grads[i].cwiseProduct(grads[i]);
                const Matrix mhat = m.adam.m[i] / c1;
                const Matrix vhat = m.adam.v[i] / c2;
                *params[i] -= (opt.lr * mhat.array() / (vhat.array().sqrt() + eps)).matrix();
            }
            m.b1 = vec_buf[0];
            m.gamma = vec_buf[1];
            m.beta = vec_buf[2];
            m.b2 = vec_buf[3];
        }
        m.train_loss.push_back(loss_sum / batches);
        const double val =
            n_val > 0 ? cross_entropy(mlp_probabilities(m, xv), tv) : m.train_loss.back();
        m.validation_loss.push_back(val);
        if (val < best_val) {
            best_val = val;
            best = m;
            best.best_epoch = epoch;
        }
    }
    best.train_loss = m.train_loss;
    best.validation_loss = m.validation_loss;
    return best;
}

MlpModel train_mlp(const data::Dataset& ds, Index hidden, std::size_t epochs, double lr, std::uint64_t seed) {
    MlpOptions opt;
    opt.hidden = hidden;
    opt.epochs = epochs;
    opt.lr = lr;
    opt.seed = seed;
    return train_mlp(ds, opt);
}

Matrix mlp_probabilities(const MlpModel& m, const Matrix& x) {
    require_dims(x.cols() == m.w1.rows(), "predict_mlp: feature count mismatch");
    return forward(m, x, false).prob;
}

Prediction predict_mlp(const MlpModel& m, const Matrix& x) {
    const Matrix prob = mlp_probabilities(m, x);
    Prediction p;
    p.scores = prob.col(1);
    p.labels = p.scores.unaryExpr([](double v) { return v >= 0.5 ? 1.0 : -1.0; });
    return p;
}

// ---- RVFL ----

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vector ridge_output_weights(const Matrix& d, const Vector& y, double lambda) {
    require(lambda > 0.0, "ridge_output_weights: lambda must be positive");
    if (d.cols() <= d.rows()) {
        Matrix a = d.transpose() * d;
        a.diagonal().array() += lambda;
        return numkit::solve_spd(a, Vector(d.transpose() * y)).x;
    }
    Matrix a = d * d.transpose();
    a.diagonal().array() += lambda;
    return d.transpose() * numkit::solve_spd(a, y).x;
}

namespace {

Matrix hidden_layer(const Matrix& x, const Matrix& w, const Vector& b) {
    return ((x * w).rowwise() + b.transpose()).unaryExpr([](double z) { return sigmoid(z); });
}

}  // namespace

Matrix rvfl_features(const RvflModel& m, const Matrix& x) {
    require_dims(x.cols() == m.w_in.rows(), "predict_rvfl: feature count mismatch");
    if (m.zero_hidden) return x;
    Matrix out(x.rows(), x.cols() + m.w_in.cols());
    out.leftCols(x.cols()) = x;
    out.rightCols(m.w_in.cols()) = hidden_layer(x, m.w_in, m.b_in);
    return out;
}

RvflModel train_rvfl(const data::Dataset& ds, const RvflOptions& opt) {
    require(opt.hidden >= 1, "train_rvfl: N must be >= 1");
    require(opt.scale > 0.0, "train_rvfl: S must be positive");
    require(opt.l1 >= 0.0, "train_rvfl: l1 must be >= 0");
    RvflModel m;
    m.scale = opt.scale;
    m.seed = opt.seed;
    m.c_reg = std::ldexp(1.0, opt.c_exp);
    m.zero_hidden = opt.zero_hidden;
    Rng rng(derive_seed(opt.seed, "rvfl"));
    m.w_in.resize(ds.d(), opt.hidden);
    for (Index i = 0; i < m.w_in.size(); ++i) m.w_in.data()[i] = uniform(rng, -opt.scale, opt.scale);
    m.b_in.resize(opt.hidden);
    for (Index i = 0; i < opt.hidden; ++i) m.b_in(i) = uniform(rng, -opt.scale, opt.scale);

    if (opt.autoencoder) {
        // Reconstruct the inputs from the random map; the sparse decoder becomes the encoder.
        const Matrix h_tilde = hidden_layer(ds.x, m.w_in, m.b_in);
        Matrix omega;
        if (opt.l1 == 0.0) {
            Matrix a = h_tilde.transpose() * h_tilde;
            omega = numkit::solve_spd(a, Matrix(h_tilde.transpose() * ds.x)).x;
        } else {
            const numkit::FistaResult fr = numkit::fista_l1(h_tilde, ds.x, opt.l1, opt.fista_iters);
            omega = fr.w;
            m.fista_converged = fr.converged;
        }
        m.w_in = omega.transpose();
        m.pretrained = true;
    }
    m.beta = ridge_output_weights(rvfl_features(m, ds.x), ds.y, m.c_reg);
    return m;
}

RvflModel train_rvfl(const data::Dataset& ds, Index n_hidden, int c_exp, double scale, std::uint64_t seed) {
    RvflOptions opt;
    opt.hidden = n_hidden;
    opt.c_exp = c_exp;
    opt.scale = scale;
    opt.seed = seed;
    return train_rvfl(ds, opt);
}

RvflModel train_rvfl_ae(const data::Dataset& ds, Index n_hidden, int c_exp, double l1, std::uint64_t seed) {
    RvflOptions opt;
    opt.hidden = n_hidden;
    opt.c_exp = c_exp;
    opt.seed = seed;
    opt.autoencoder = true;
    opt.l1 = l1;
    return train_rvfl(ds, opt);
}

Prediction predict_rvfl(const RvflModel& m, const Matrix& x) { return sign_prediction(rvfl_features(m, x) * m.beta); }

}  // namespace twinbench::shallow
