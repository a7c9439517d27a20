#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "twinbench/experiment.hpp"
#include "twinbench/rng.hpp"
#include "twinbench/stats.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace twinbench;
using namespace twinbench::experiment;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("twinbench_test_experiment_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.synthetic = SyntheticSpec{20, 3, 7, 2.0, 5};
    cfg.matters = {data::Modality::CM};
    cfg.classifiers = {"knn"};
    cfg.criteria = {featsel::Criterion::TTest};
    cfg.feature_counts = {4};
    cfg.folds = 2;
    cfg.seed = 3;
    return cfg;
}

const char* kMinimal = R"({"synthetic": {"n": 20}, "classifiers": ["knn"], "criteria": ["ttest"],
                          "feature_counts": [4], "folds": 2})";

}  // namespace

TEST_CASE("parse config reads every documented key") {
    const ExperimentConfig cfg = parse_config(R"({
        "data": {"gm": "gm.csv", "wm": "wm.csv", "label_column": "dx"},
        "matters": ["GM", "CM"],
        "classifiers": ["twsvm_lin", "raf"],
        "criteria": ["ttest", "NCA"],
        "feature_counts": [100, 300],
        "folds": 5,
        "seed": 9,
        "standardize": false,
        "rank_on_full": true,
        "tune": false,
        "grids": {"twsvm_lin": {"c1": [0.1, 1]}},
        "params": {"raf": {"n_trees": 10}},
        "nca_lambda_exponents": [1, 2]
    })",
                                              "/base");
    CHECK(cfg.gm_path == fs::path("/base/gm.csv"));
    CHECK(cfg.wm_path == fs::path("/base/wm.csv"));
    CHECK(cfg.label_column == "dx");
    CHECK(cfg.matters == std::vector<data::Modality>{data::Modality::GM, data::Modality::CM});
    CHECK(cfg.classifiers == std::vector<std::string>{"twsvm_lin", "raf"});
    CHECK(cfg.criteria == std::vector<featsel::Criterion>{featsel::Criterion::TTest, featsel::Criterion::NCA});
    CHECK(cfg.feature_counts == std::vector<Index>{100, 300});
    CHECK(cfg.folds == 5);
    CHECK(cfg.seed == 9);
    CHECK(!cfg.standardize);
    CHECK(cfg.rank_on_full);
    CHECK(!cfg.tune);
    REQUIRE(cfg.grids.count("twsvm_lin"));
    CHECK(cfg.grids.at("twsvm_lin")[0].values == std::vector<double>{0.1, 1});
    CHECK(cfg.params.at("raf").at("n_trees") == 10);
    CHECK(cfg.nca_lambda_exponents == std::vector<int>{1, 2});
}

TEST_CASE("default config covers the full lattice") {
    const ExperimentConfig cfg;
    CHECK(cfg.classifiers.size() == 23);
    CHECK(cfg.criteria.size() == 7);
    REQUIRE(cfg.feature_counts.size() == 13);
    CHECK(cfg.feature_counts.front() == 100);
    CHECK(cfg.feature_counts.back() == 1300);
    CHECK(cfg.folds == 10);
    CHECK(cfg.classifiers.size() * cfg.criteria.size() * cfg.feature_counts.size() == 2093);
}

TEST_CASE("parse config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(parse_config(R"({"synthetic": {"n": 20}, "folds": 2, "colour": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"synthetic": {"n": 20}, "classifiers": ["nope"]})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"synthetic": {"n": 20}, "criteria": ["nope"]})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"synthetic": {"n": 20}, "feature_counts": [300, 200]})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"synthetic": {"n": 20}, "feature_counts": [0, 200]})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"synthetic": {"n": 20}, "folds": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"folds": 2})"), ConfigError);
}

TEST_CASE("config survives a json round trip") {
    const ExperimentConfig a = parse_config(R"({"synthetic": {"n": 30, "noise": 40}, "matters": ["GM", "WM"],
        "classifiers": ["knn", "krr_nl"], "criteria": ["roc", "mrmr"], "feature_counts": [5, 10], "folds": 3,
        "grids": {"knn": {"k": [1, 3]}}, "params": {"krr_nl": {"gamma": 0.5}}})");
    const std::string text = config_to_json(a);
    const ExperimentConfig b = parse_config(text);
    CHECK(config_to_json(b) == text);
    CHECK(b.synthetic->noise == 40);
    CHECK(b.params.at("krr_nl").at("gamma") == 0.5);
}

TEST_CASE("seed environment variable overrides the config") {
    ExperimentConfig cfg = parse_config(kMinimal);
    ::setenv("TWINBENCH_SEED", "1234", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 1234);
    ::setenv("TWINBENCH_SEED", "twelve", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), ConfigError);
    ::unsetenv("TWINBENCH_SEED");
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 1234);
}

TEST_CASE("cell identifiers join the lattice coordinates") {
    CHECK(cell_id(data::Modality::CM, "twsvm_lin", featsel::Criterion::TTest, 500) == "CM__twsvm_lin__ttest__500");
    CHECK(cell_id(data::Modality::WM, "raf", featsel::Criterion::NCA, 100) == "WM__raf__nca__100");
}

TEST_CASE("cell grid follows tuning flags and adds the nca axis") {
    ExperimentConfig cfg;
    CHECK(cell_grid(cfg, "twsvm_lin", featsel::Criterion::TTest).size() == 11);
    CHECK(cell_grid(cfg, "twsvm_lin", featsel::Criterion::NCA).size() == 11 * 20);
    CHECK(cell_grid(cfg, "tbsvm_lin", featsel::Criterion::TTest).size() == 121);
    cfg.params["tbsvm_lin"] = {{"c2", 0.5}};
    const auto fixed = cell_grid(cfg, "tbsvm_lin", featsel::Criterion::TTest);
    REQUIRE(fixed.size() == 11);
    for (const auto& p : fixed) CHECK(p.at("c2") == 0.5);
    CHECK(fixed.front().at("c1") == doctest::Approx(1e-5));
    CHECK(fixed.back().at("c1") == doctest::Approx(1e5));
    cfg.tune = false;
    const auto single = cell_grid(cfg, "tbsvm_lin", featsel::Criterion::NCA);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == classifiers::Params{{"c2", 0.5}});
}

TEST_CASE("sha256 matches the standard test vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("a one cell config produces exactly one cell result") {
    const fs::path out = fresh_dir("one_cell");
    RunOptions opt;
    opt.out = out;
    const RunSummary s = run(tiny_config(), opt);
    CHECK(s.total == 1);
    CHECK(s.computed == 1);
    CHECK(s.failed == 0);
    const std::vector<StoredCell> cells = load_cells(out);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].ok);
    CHECK(cells[0].id == "CM__knn__ttest__4");
    CHECK(cells[0].result.folds.size() == 2);
    CHECK(fs::exists(out / "tables" / "CM_4_results_lin.csv"));
    CHECK(fs::exists(out / "tables" / "CM_4_results_nl.csv"));
    CHECK(fs::exists(out / "curves" / "curves_by_family.svg"));
    CHECK(fs::exists(out / "config.json"));
}

TEST_CASE("resume reuses every finished cell and keeps the manifest") {
    const fs::path out = fresh_dir("resume");
    ExperimentConfig cfg = tiny_config();
    cfg.classifiers = {"knn", "krr_lin"};
    cfg.feature_counts = {2, 4};
    RunOptions opt;
    opt.out = out;
    const RunSummary first = run(cfg, opt);
    CHECK(first.computed == 4);
    const std::string manifest = slurp(out / "manifest.json");
    opt.resume = true;
    const RunSummary second = run(cfg, opt);
    CHECK(second.total == 4);
    CHECK(second.reused == 4);
    CHECK(second.computed == 0);
    CHECK(slurp(out / "manifest.json") == manifest);

    // a tampered cell no longer matches its hash and is recomputed
    const fs::path cell = out / "cells" / "CM__knn__ttest__2.json";
    const std::string original = slurp(cell);
    std::ofstream(cell, std::ios::binary) << original << " ";
    const RunSummary third = run(cfg, opt);
    CHECK(third.reused == 3);
    CHECK(third.computed == 1);
    CHECK(slurp(cell) == original);
    CHECK(slurp(out / "manifest.json") == manifest);
}

TEST_CASE("manifest lists every file with its hash") {
    const fs::path out = fresh_dir("manifest");
    RunOptions opt;
    opt.out = out;
    run(tiny_config(), opt);
    const auto manifest = read_manifest(out);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        ++files;
        const std::string rel = fs::relative(e.path(), out).generic_string();
        REQUIRE_MESSAGE(manifest.count(rel), rel);
        CHECK(manifest.at(rel) == sha256_file(e.path()));
    }
    CHECK(manifest.size() == files);
}

TEST_CASE("property: manifest hashes are stable across fresh runs") {
    const fs::path a = fresh_dir("stable_a"), b = fresh_dir("stable_b");
    ExperimentConfig cfg = tiny_config();
    cfg.classifiers = {"raf", "twsvm_lin"};
    cfg.params["raf"] = {{"n_trees", 5}};
    RunOptions opt;
    opt.out = a;
    run(cfg, opt);
    opt.out = b;
    opt.jobs = 2;
    run(cfg, opt);
    CHECK(read_manifest(a) == read_manifest(b));
}

TEST_CASE("tables use the criterion header and write undefined metrics as NaN") {
    const fs::path dir = fresh_dir("tables");
    // 8 patients and 12 controls: the majority baseline never predicts a patient
    data::Dataset ds = data::make_informative(20, 2, 4, 1.0, 7);
    for (Index i = 0, pos = 0; i < ds.n(); ++i)
        if (ds.y(i) > 0 && ++pos > 8) ds.y(i) = -1.0;
    data::save_csv(ds, dir / "gm.csv");
    ExperimentConfig cfg = parse_config(R"({"data": {"gm": "gm.csv"}, "matters": ["GM"],
        "classifiers": ["majority", "knn", "krr_nl"], "criteria": ["ttest", "roc"], "feature_counts": [3],
        "folds": 2})",
                                        dir);
    RunOptions opt;
    opt.out = dir / "store";
    CHECK(run(cfg, opt).failed == 0);

    const auto lin = read_csv(opt.out / "tables" / "GM_3_results_lin.csv");
    REQUIRE(lin.size() == 3);
    CHECK(lin[0] == std::vector<std::string>{"Methods", "T-Test", "ROC", "Wilcoxon", "Entropy", "Bhattacharyya", "MRMR",
                                             "NCA"});
    CHECK(lin[1][0] == "KNN");
    CHECK(lin[2][0] == "Majority");
    CHECK(lin[1].size() == 8);
    CHECK(lin[1][3].empty());  // criteria that were not run stay blank
    const auto nl = read_csv(opt.out / "tables" / "GM_3_results_nl.csv");
    REQUIRE(nl.size() == 2);
    CHECK(nl[1][0] == "KRR (Non-Linear)");

    const auto precision = read_csv(opt.out / "tables" / "GM_3_precision_lin.csv");
    CHECK(precision[2][1] == "NaN");
    CHECK(precision[2][2] == "NaN");
    const auto accuracy = read_csv(opt.out / "tables" / "GM_3_results_lin.csv");
    CHECK(accuracy[2][1] == "60.00");
    CHECK(fs::exists(opt.out / "tables" / "NOTE.txt"));
}

TEST_CASE("format percent rounds to two decimals") {
    CHECK(format_percent(0.8671) == "86.71");
    CHECK(format_percent(1.0) == "100.00");
    CHECK(format_percent(std::nan("")) == "NaN");
}

TEST_CASE("property: every table entry traces back to one stored cell") {
    const fs::path out = fresh_dir("audit");
    ExperimentConfig cfg = tiny_config();
    cfg.classifiers = {"knn", "krr_lin", "twsvm_nl"};
    cfg.criteria = {featsel::Criterion::TTest, featsel::Criterion::Wilcoxon};
    cfg.tune = false;
    RunOptions opt;
    opt.out = out;
    run(cfg, opt);
    std::map<std::string, eval::MetricSet> by_row;  // "<display>|<criterion display>"
    for (const StoredCell& c : load_cells(out))
        by_row[classifiers::lookup(c.result.classifier).display + "|" + featsel::display_name(c.result.criterion)] =
            c.result.mean;
    std::size_t checked = 0;
    for (const std::string metric : {"accuracy", "auc", "g_mean"})
        for (const std::string file : {"lin", "nl"}) {
            const std::string stem = metric == "accuracy" ? "results" : metric;
            const auto rows = read_csv(out / "tables" / ("CM_4_" + stem + "_" + file + ".csv"));
            for (std::size_t r = 1; r < rows.size(); ++r)
                for (std::size_t c = 1; c < rows[r].size(); ++c) {
                    if (rows[r][c].empty()) continue;
                    const auto it = by_row.find(rows[r][0] + "|" + rows[0][c]);
                    REQUIRE(it != by_row.end());
                    CHECK(rows[r][c] == format_percent(it->second.get(metric)));
                    ++checked;
                }
        }
    CHECK(checked == 3 * 3 * 2);
}

TEST_CASE("curves average the complementary lattice axes") {
    const fs::path out = fresh_dir("curves");
    ExperimentConfig cfg = tiny_config();
    cfg.synthetic = SyntheticSpec{24, 3, 9, 1.5, 2};
    cfg.classifiers = {"knn", "krr_lin", "raf"};
    cfg.params["raf"] = {{"n_trees", 5}};
    cfg.criteria = {featsel::Criterion::TTest, featsel::Criterion::ROC};
    cfg.feature_counts = {2, 6};
    cfg.tune = false;
    RunOptions opt;
    opt.out = out;
    run(cfg, opt);

    // spreadsheet style recomputation from the raw cells
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> family, criterion;
    for (const StoredCell& c : load_cells(out)) {
        const std::string count = std::to_string(c.result.feature_count);
        auto& f = family[{count, classifiers::lookup(c.result.classifier).family}];
        f.first += 100.0 * c.result.mean.accuracy;
        f.second += 1;
        auto& k = criterion[{count, featsel::display_name(c.result.criterion)}];
        k.first += 100.0 * c.result.mean.accuracy;
        k.second += 1;
    }
    for (const auto& [file, expected] :
         std::vector<std::pair<std::string, decltype(family)*>>{{"curves_by_family.csv", &family},
                                                                {"curves_by_criterion.csv", &criterion}}) {
        const auto rows = read_csv(out / "curves" / file);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0][0] == "feature_count");
        CHECK(rows[1][0] == "2");
        CHECK(rows[2][0] == "6");
        for (std::size_t r = 1; r < rows.size(); ++r)
            for (std::size_t c = 1; c < rows[r].size(); ++c) {
                const auto& slot = expected->at({rows[r][0], rows[0][c]});
                CHECK(std::stod(rows[r][c]) == doctest::Approx(slot.first / slot.second).epsilon(1e-9));
            }
    }
    const auto fam = read_csv(out / "curves" / "curves_by_family.csv");
    CHECK(fam[0] == std::vector<std::string>{"feature_count", "RaF-family", "KNN", "KRR"});
}

TEST_CASE("curve with one classifier and criterion equals the cell accuracies") {
    const fs::path out = fresh_dir("curve_single");
    ExperimentConfig cfg = tiny_config();
    cfg.feature_counts = {2, 4, 6};
    RunOptions opt;
    opt.out = out;
    run(cfg, opt);
    const auto rows = read_csv(out / "curves" / "curves_by_matter.csv");
    REQUIRE(rows.size() == 4);
    for (const StoredCell& c : load_cells(out)) {
        const std::size_t r = static_cast<std::size_t>(c.result.feature_count / 2);
        CHECK(std::stod(rows[r][1]) == doctest::Approx(100.0 * c.result.mean.accuracy).epsilon(1e-12));
    }
}

TEST_CASE("a failing cell is recorded and the run continues") {
    const fs::path out = fresh_dir("failure");
    ExperimentConfig cfg = tiny_config();
    cfg.classifiers = {"knn", "mlp"};
    cfg.params["mlp"] = {{"lr", 1e300}, {"epochs", 3}};
    RunOptions opt;
    opt.out = out;
    const RunSummary s = run(cfg, opt);
    CHECK(s.failed == 1);
    REQUIRE(s.failures.size() == 1);
    CHECK(s.failures[0].find("CM__mlp__ttest__4") == 0);
    int ok = 0;
    for (const StoredCell& c : load_cells(out)) ok += c.ok ? 1 : 0;
    CHECK(ok == 1);
}

TEST_CASE("feature counts beyond the data dimension are a config error") {
    ExperimentConfig cfg = tiny_config();
    cfg.feature_counts = {50};
    RunOptions opt;
    opt.out = fresh_dir("too_many");
    CHECK_THROWS_AS(run(cfg, opt), ConfigError);
}

TEST_CASE("stats report reproduces the analysis on a scores file") {
    const fs::path dir = fresh_dir("stats");
    Rng rng(4);
    std::ostringstream csv;
    csv << "method";
    for (int j = 0; j < 12; ++j) csv << ",alg" << j;
    csv << "\n";
    Matrix scores(7, 12);
    for (int i = 0; i < 7; ++i) {
        csv << "fs" << i;
        for (int j = 0; j < 12; ++j) {
            scores(i, j) = std::round(uniform(rng, 50.0, 90.0) * 100.0) / 100.0 + j;
            csv << ',' << scores(i, j);
        }
        csv << "\n";
    }
    std::ofstream(dir / "scores.csv") << csv.str();
    std::ostringstream notes;
    const auto files = write_stats_report(dir / "scores.csv", 0.05, dir / "out", &notes);
    REQUIRE(files.size() == 3);
    const stats::FriedmanReport rep = stats::analyze(scores, 0.05);
    std::map<std::string, std::string> values;
    for (const auto& row : read_csv(dir / "out" / "friedman.csv")) values[row[0]] = row.size() > 1 ? row[1] : "";
    CHECK(std::stod(values.at("chi2_F")) == doctest::Approx(rep.chi2).epsilon(1e-9));
    CHECK(std::stod(values.at("F_F")) == doctest::Approx(rep.ff).epsilon(1e-9));
    CHECK(std::stod(values.at("CD")) == doctest::Approx(6.298).epsilon(1e-3));
    CHECK(values.at("q_alpha") == "3.268");
    std::size_t significant = 0;
    for (const auto& p : rep.pairs) significant += p.significant ? 1 : 0;
    CHECK(read_csv(dir / "out" / "significant_pairs.csv").size() == significant + 1);
    CHECK(read_csv(dir / "out" / "ranks.csv").size() == 13);
    CHECK(notes.str().find("N > 10") != std::string::npos);
}

TEST_CASE("ranking file lists features best first") {
    const fs::path dir = fresh_dir("ranking");
    const data::Dataset ds = data::make_informative(30, 2, 5, 2.0, 3);
    const featsel::Ranking r = featsel::rank_by_criterion(ds, featsel::Criterion::TTest);
    write_ranking(r, ds, dir / "rank.csv");
    const auto rows = read_csv(dir / "rank.csv");
    REQUIRE(rows.size() == 8);
    CHECK(rows[0] == std::vector<std::string>{"rank", "feature_id", "score", "degenerate"});
    CHECK(rows[1][0] == "1");
    CHECK(rows[1][1] == ds.feature_ids[static_cast<std::size_t>(r.order[0])]);
}
