// twinbench command line: run / rank / stats / report / synth.
//
// Exit codes: 0 success, 1 some cells failed, 2 configuration or data error.

#include "twinbench/experiment.hpp"
#include "twinbench/featsel.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace twinbench;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kConfigError = 2;

int cmd_run(const fs::path& config_path, const fs::path& out, int jobs, bool resume) {
    experiment::ExperimentConfig cfg = experiment::load_config(config_path);
    experiment::apply_env_overrides(cfg);
    experiment::RunOptions opt;
    opt.out = out;
    opt.jobs = jobs;
    opt.resume = resume;
    opt.log = &std::cerr;
    const experiment::RunSummary s = experiment::run(cfg, opt);
    std::cout << "cells: " << s.total << " total, " << s.computed << " computed, " << s.reused << " reused, "
              << s.failed << " failed\n";
    for (const std::string& f : s.failures) std::cout << "failed: " << f << "\n";
    return s.failed > 0 ? kPartial : kOk;
}

int cmd_rank(const fs::path& data_path, const std::string& criterion, const fs::path& out, const std::string& label,
             double lambda) {
    const data::Dataset ds = data::load_csv(data_path, label);
    const featsel::Criterion c = featsel::parse_criterion(criterion);
    featsel::Ranking r;
    if (c == featsel::Criterion::MRMR)
        r = featsel::rank_mrmr(ds);
    else if (c == featsel::Criterion::NCA)
        r = featsel::rank_nca(ds, lambda > 0 ? lambda : 1.0 / static_cast<double>(ds.n()));
    else
        r = featsel::rank_by_criterion(ds, c);
    experiment::write_ranking(r, ds, out);
    std::cout << "wrote " << out.string() << " (" << ds.d() << " features)\n";
    return kOk;
}

int cmd_stats(const fs::path& scores, double alpha, const fs::path& out) {
    for (const fs::path& p : experiment::write_stats_report(scores, alpha, out, &std::cout))
        std::cout << "wrote " << p.string() << "\n";
    return kOk;
}

int cmd_report(const fs::path& store, const std::string& matter, long features) {
    const fs::path tables = store / "tables";
    for (const fs::path& p : experiment::emit_tables(store, data::parse_modality(matter), features, tables, &std::cerr))
        std::cout << "wrote " << p.string() << "\n";
    for (auto g : {experiment::Grouping::ByFamily, experiment::Grouping::ByCriterion, experiment::Grouping::ByMatter})
        experiment::emit_curves(store, g, store / "curves");
    experiment::write_manifest(store);
    return kOk;
}

int cmd_synth(const fs::path& out, long n, long informative, long noise, double shift, std::uint64_t seed) {
    experiment::ExperimentConfig cfg;
    cfg.synthetic = experiment::SyntheticSpec{n, informative, noise, shift, seed};
    for (data::Modality m : {data::Modality::GM, data::Modality::WM}) {
        const fs::path p = out / (data::to_string(m) + ".csv");
        fs::create_directories(out);
        data::save_csv(experiment::load_matter(cfg, m), p);
        std::cout << "wrote " << p.string() << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"twinbench: classifier and feature-selection benchmark for two-class imaging data"};
    app.require_subcommand(1);

    fs::path config, out = "results";
    int jobs = 1;
    bool resume = false;
    auto* run = app.add_subcommand("run", "run an experiment lattice from a JSON config");
    run->add_option("--config", config, "config file")->required();
    run->add_option("--out", out, "output directory");
    run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--resume", resume, "skip cells already recorded in the manifest");

    fs::path data_path, rank_out;
    std::string criterion, label = "label";
    double lambda = 0.0;
    auto* rank = app.add_subcommand("rank", "rank the features of one CSV");
    rank->add_option("--data", data_path, "input CSV")->required();
    rank->add_option("--criterion", criterion, "ttest, roc, wilcoxon, entropy, bhattacharyya, mrmr or nca")->required();
    rank->add_option("--out", rank_out, "output CSV")->required();
    rank->add_option("--label", label, "label column name");
    rank->add_option("--lambda", lambda, "NCA regularization (default 1/n)");

    fs::path scores, stats_out;
    double alpha = 0.05;
    auto* stats = app.add_subcommand("stats", "Friedman, Iman-Davenport and Nemenyi on a scores CSV");
    stats->add_option("--scores", scores, "rows = selection methods, columns = classifiers")->required();
    stats->add_option("--alpha", alpha, "0.05 or 0.10");
    stats->add_option("--out", stats_out, "output directory")->required();

    fs::path store;
    std::string matter = "CM";
    long features = 500;
    auto* report = app.add_subcommand("report", "write result tables for one matter and feature count");
    report->add_option("--store", store, "results directory")->required();
    report->add_option("--matter", matter, "GM, WM or CM");
    report->add_option("--features", features, "feature count");

    fs::path synth_out;
    long n = 100, informative = 10, noise = 190;
    double shift = 1.0;
    std::uint64_t seed = 1;
    auto* synth = app.add_subcommand("synth", "write synthetic GM.csv and WM.csv");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", n, "subjects");
    synth->add_option("--informative", informative, "informative features per matter");
    synth->add_option("--noise", noise, "noise features per matter");
    synth->add_option("--shift", shift, "class mean shift of informative features");
    synth->add_option("--seed", seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(config, out, jobs, resume);
        if (*rank) return cmd_rank(data_path, criterion, rank_out, label, lambda);
        if (*stats) return cmd_stats(scores, alpha, stats_out);
        if (*report) return cmd_report(store, matter, features);
        if (*synth) return cmd_synth(synth_out, n, informative, noise, shift, seed);
    } catch (const experiment::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const data::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kConfigError;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kOk;
}
