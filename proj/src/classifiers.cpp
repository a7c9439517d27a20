#include "twinbench/classifiers.hpp"

#include "twinbench/forests.hpp"
#include "twinbench/shallow.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

namespace twinbench::classifiers {

namespace {

using kernels::KernelSpec;

class FnModel final : public Model {
public:
    explicit FnModel(std::function<Prediction(const Matrix&)> f) : f_(std::move(f)) {}
    Prediction predict(const Matrix& x) const override { return f_(x); }

private:
    std::function<Prediction(const Matrix&)> f_;
};

template <class T, class P>
std::unique_ptr<Model> wrap(T model, P predict) {
    auto shared = std::make_shared<T>(std::move(model));
    return std::make_unique<FnModel>([shared, predict](const Matrix& x) { return predict(*shared, x); });
}

double get(const Params& p, const std::string& key) {
    const auto it = p.find(key);
    require(it != p.end(), "classifier parameter '" + key + "' is missing");
    return it->second;
}

double get_or(const Params& p, const std::string& key, const std::string& partner) {
    const auto it = p.find(key);
    return it != p.end() ? it->second : get(p, partner);
}

KernelSpec kernel_of(const ClassifierInfo& info, const Params& p) {
    return info.file == TableFile::Nl || info.id == "svm_nl" || info.id == "pingtsvm_nl"
               ? KernelSpec::gaussian(get(p, "gamma"))
               : KernelSpec::linear();
}

std::vector<double> range(double lo, double step, double hi) {
    std::vector<double> v;
    for (double x = lo; x <= hi + 1e-9; x += step) v.push_back(x);
    return v;
}

ClassifierInfo make(std::string id, std::string display, TableFile file, std::string family, Params defaults,
                    Grid grid, bool uses_seed = false) {
    return {std::move(id), std::move(display), file, std::move(family), std::move(defaults), std::move(grid), uses_seed};
}

std::vector<ClassifierInfo> build_registry() {
    const auto c = powers(10.0, -5, 5);
    const auto g = powers(2.0, -10, 10);
    const std::vector<double> energy = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    const auto c_exp = range(-5, 1, 14);
    const auto n_hidden = range(3, 20, 203);
    const double g0 = std::ldexp(1.0, -3);
    const auto L = TableFile::Lin;
    const auto N = TableFile::Nl;
    const Params forest = {{"n_trees", 100}};
    return {
        make("het_raf", "Het-RaF", L, "RaF-family", forest, {}, true),
        make("knn", "KNN", L, "KNN", {{"k", 5}}, {}),
        make("krr_lin", "KRR (Linear)", L, "KRR", {{"lambda", 1}}, {{"lambda", c}}),
        make("lstsvm_lin", "LSTWSVM (Linear)", L, "SVM-family", {{"c1", 1}}, {{"c1", c}}),
        make("mpraf_n", "MPRaF-N", L, "RaF-family", forest, {}, true),
        make("mpraf_p", "MPRaF-P", L, "RaF-family", forest, {}, true),
        make("mpraf_t", "MPRaF-T", L, "RaF-family", forest, {}, true),
        make("mlp", "Neural", L, "Networks", {{"hidden", 64}, {"epochs", 200}, {"lr", 1e-3}},
             {{"hidden", {32, 64, 128}}}, true),
        make("pingtsvm", "pinGTSVM", L, "SVM-family", {{"c1", 1}, {"tau", 0.05}}, {{"c1", c}}),
        make("raf_lda", "RaF-LDA", L, "RaF-family", forest, {}, true),
        make("raf_pca", "RaF-PCA", L, "RaF-family", forest, {}, true),
        make("raf", "RaF", L, "RaF-family", forest, {}, true),
        make("relstsvm_lin", "RELSTSVM (Linear)", L, "SVM-family", {{"c1", 1}, {"c2", 1}, {"energy", 1}},
             {{"c1", c}, {"c2", c}, {"energy", energy}}),
        make("rvfl_ae", "RVFLAE", L, "Networks", {{"c_exp", 0}, {"n_hidden", 103}, {"l1", 1e-3}},
             {{"c_exp", c_exp}, {"n_hidden", n_hidden}}, true),
        make("rvfl", "RVFL", L, "Networks", {{"c_exp", 0}, {"n_hidden", 103}, {"scale", 1}},
             {{"c_exp", c_exp}, {"n_hidden", n_hidden}}, true),
        make("svm", "SVM", L, "SVM-family", {{"c", 1}}, {{"c", c}}),
        make("tbsvm_lin", "TBSVM (Linear)", L, "SVM-family", {{"c1", 1}, {"c2", 1}}, {{"c1", c}, {"c2", c}}),
        make("twsvm_lin", "TWSVM (Linear)", L, "SVM-family", {{"c1", 1}}, {{"c1", c}}),
        make("krr_nl", "KRR (Non-Linear)", N, "KRR", {{"lambda", 1}, {"gamma", g0}}, {{"lambda", c}, {"gamma", g}}),
        make("lstsvm_nl", "LSTWSVM (Non-Linear)", N, "SVM-family", {{"c1", 1}, {"gamma", g0}},
             {{"c1", c}, {"gamma", g}}),
        make("relstsvm_nl", "RELSTSVM (Non-Linear)", N, "SVM-family",
             {{"c1", 1}, {"c2", 1}, {"energy", 1}, {"gamma", g0}},
             {{"c1", c}, {"c2", c}, {"energy", energy}, {"gamma", g}}),
        make("tbsvm_nl", "TBSVM (Non-Linear)", N, "SVM-family", {{"c1", 1}, {"c2", 1}, {"gamma", g0}},
             {{"c1", c}, {"c2", c}, {"gamma", g}}),
        make("twsvm_nl", "TWSVM (Non-Linear)", N, "SVM-family", {{"c1", 1}, {"gamma", g0}},
             {{"c1", c}, {"gamma", g}}),
    };
}

std::vector<ClassifierInfo> build_extras() {
    const auto c = powers(10.0, -5, 5);
    const auto g = powers(2.0, -10, 10);
    const double g0 = std::ldexp(1.0, -3);
    return {
        make("svm_nl", "SVM (Non-Linear)", TableFile::Nl, "SVM-family", {{"c", 1}, {"gamma", g0}},
             {{"c", c}, {"gamma", g}}),
        make("pingtsvm_nl", "pinGTSVM (Non-Linear)", TableFile::Nl, "SVM-family",
             {{"c1", 1}, {"tau", 0.05}, {"gamma", g0}}, {{"c1", c}, {"gamma", g}}),
        make("majority", "Majority", TableFile::Lin, "Baseline", {}, {}),
    };
}

forests::Variant forest_variant(const std::string& id) {
    if (id == "raf") return forests::Variant::RaF;
    if (id == "mpraf_t") return forests::Variant::MPRaF_T;
    if (id == "mpraf_p") return forests::Variant::MPRaF_P;
    if (id == "mpraf_n") return forests::Variant::MPRaF_N;
    if (id == "het_raf") return forests::Variant::Het;
    if (id == "raf_lda") return forests::Variant::RaF_LDA;
    return forests::Variant::RaF_PCA;
}

int as_int(double v, const std::string& what) {
    require(std::isfinite(v) && v == std::round(v), what + " must be an integer");
    return static_cast<int>(v);
}

}  // namespace

std::string to_string(TableFile f) { return f == TableFile::Lin ? "lin" : "nl"; }

std::vector<double> powers(double base, int lo, int hi) {
    std::vector<double> v;
    for (int i = lo; i <= hi; ++i) v.push_back(std::pow(base, i));
    return v;
}

const std::vector<ClassifierInfo>& registry() {
    static const std::vector<ClassifierInfo> r = build_registry();
    return r;
}

const std::vector<ClassifierInfo>& extras() {
    static const std::vector<ClassifierInfo> r = build_extras();
    return r;
}

const ClassifierInfo& lookup(const std::string& id) {
    for (const auto* list : {&registry(), &extras()})
        for (const ClassifierInfo& info : *list)
            if (info.id == id) return info;
    throw InvalidArgument("unknown classifier '" + id + "'");
}

std::vector<std::string> default_ids() {
    std::vector<std::string> ids;
    for (const ClassifierInfo& info : registry()) ids.push_back(info.id);
    return ids;
}

std::unique_ptr<Model> train(const std::string& id, const data::Dataset& ds, const Params& params,
                             std::uint64_t seed) {
    const ClassifierInfo& info = lookup(id);
    Params p = info.defaults;
    for (const auto& [k, v] : params) p[k] = v;

    const std::string stem = id.substr(0, id.find('_'));
    if (id == "majority") {
        // Predicts the more frequent training label (+1 on a tie) for every query.
        const double share = static_cast<double>(ds.count(1.0)) / static_cast<double>(ds.n());
        return wrap(share, [](double pos, const Matrix& x) {
            Prediction out;
            out.scores = Vector::Constant(x.rows(), pos);
            out.labels = Vector::Constant(x.rows(), pos >= 0.5 ? 1.0 : -1.0);
            return out;
        });
    }
    if (info.family == "RaF-family") {
        const int trees = as_int(get(p, "n_trees"), "n_trees");
        return wrap(forests::train_forest(ds, forest_variant(id), trees, seed), forests::predict_forest);
    }
    if (id == "knn") {
        const int k = as_int(get(p, "k"), "k");
        require(k >= 1 && k % 2 == 1, "knn: k must be a positive odd number");
        return wrap(ds, [k](const data::Dataset& train, const Matrix& x) { return shallow::predict_knn(train, x, k); });
    }
    if (id == "mlp") {
        shallow::MlpOptions opt;
        opt.hidden = as_int(get(p, "hidden"), "hidden");
        opt.epochs = static_cast<std::size_t>(as_int(get(p, "epochs"), "epochs"));
        opt.lr = get(p, "lr");
        if (p.count("batch")) opt.batch = as_int(p.at("batch"), "batch");
        opt.seed = seed;
        return wrap(shallow::train_mlp(ds, opt), shallow::predict_mlp);
    }
    if (id == "rvfl" || id == "rvfl_ae") {
        shallow::RvflOptions opt;
        opt.hidden = as_int(get(p, "n_hidden"), "n_hidden");
        opt.c_exp = as_int(get(p, "c_exp"), "c_exp");
        opt.scale = p.count("scale") ? p.at("scale") : 1.0;
        opt.seed = seed;
        opt.autoencoder = id == "rvfl_ae";
        if (opt.autoencoder) opt.l1 = get(p, "l1");
        return wrap(shallow::train_rvfl(ds, opt), shallow::predict_rvfl);
    }

    const KernelSpec k = kernel_of(info, p);
    if (stem == "krr") return wrap(shallow::train_krr(ds, get(p, "lambda"), k), shallow::predict_krr);
    if (stem == "svm") return wrap(svmfam::train_svm(ds, get(p, "c"), k), svmfam::predict_svm);

    const double c1 = get(p, "c1");
    const double c2 = get_or(p, "c2", "c1");
    svmfam::TwinClassifier m;
    if (stem == "twsvm") {
        m = svmfam::train_twsvm(ds, c1, c2, k);
    } else if (stem == "tbsvm") {
        const double c3 = p.count("c3") ? p.at("c3") : c1;
        const double c4 = p.count("c4") ? p.at("c4") : c2;
        m = svmfam::train_tbsvm(ds, c1, c2, c3, c4, k);
    } else if (stem == "lstsvm") {
        m = svmfam::train_lstsvm(ds, c1, c2, k);
    } else if (stem == "relstsvm") {
        const double c3 = p.count("c3") ? p.at("c3") : c1;
        const double c4 = p.count("c4") ? p.at("c4") : c2;
        const double e = get(p, "energy");
        m = svmfam::train_relstsvm(ds, c1, c2, c3, c4, p.count("e1") ? p.at("e1") : e, p.count("e2") ? p.at("e2") : e,
                                   k);
    } else if (stem == "pingtsvm") {
        const double tau = get(p, "tau");
        m = svmfam::train_pingtsvm(ds, c1, p.count("c2") ? p.at("c2") : c1, tau, tau, k);
    } else {
        throw InvalidArgument("classifier '" + id + "' has no trainer");
    }
    return wrap(std::move(m), svmfam::predict_twin);
}

std::vector<Params> expand_grid(const Grid& grid, const Params& base) {
    std::vector<Params> out;
    for (const Axis& a : grid) require(!a.values.empty(), "grid axis '" + a.name + "' is empty");
    std::vector<std::size_t> idx(grid.size(), 0);
    while (true) {
        Params p = base;
        for (std::size_t i = 0; i < grid.size(); ++i) p[grid[i].name] = grid[i].values[idx[i]];
        out.push_back(std::move(p));
        std::size_t i = grid.size();
        while (i > 0) {
            --i;
            if (++idx[i] < grid[i].values.size()) break;
            idx[i] = 0;
            if (i == 0) return out;
        }
        if (grid.empty()) return out;
    }
}

std::string describe(const Params& p) {
    std::ostringstream os;
    os << std::setprecision(17);
    bool first = true;
    for (const auto& [k, v] : p) {
        if (!first) os << ';';
        os << k << '=' << v;
        first = false;
    }
    return os.str();
}

}  // namespace twinbench::classifiers
