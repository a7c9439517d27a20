#pragma once

// Config-driven experiment lattice: matter x criterion x feature count x
// classifier cells, each grid-searched under k-fold cross-validation and
// stored as one JSON file. A manifest with SHA-256 hashes makes runs
// resumable and lets two runs be compared byte for byte.

#include "twinbench/classifiers.hpp"
#include "twinbench/data.hpp"
#include "twinbench/eval.hpp"
#include "twinbench/featsel.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace twinbench::experiment {

namespace fs = std::filesystem;

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Generated stand-in for the grey / white matter matrices.
struct SyntheticSpec {
    Index n = 100;
    Index informative = 10;
    Index noise = 190;
    double shift = 1.0;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    fs::path gm_path, wm_path;
    std::string label_column = "label";
    std::optional<SyntheticSpec> synthetic;
    std::vector<data::Modality> matters = {data::Modality::CM};
    std::vector<std::string> classifiers = classifiers::default_ids();
    std::vector<featsel::Criterion> criteria = featsel::all_criteria();
    std::vector<Index> feature_counts = default_feature_counts();
    int folds = 10;
    std::uint64_t seed = 42;
    bool standardize = true;
    bool rank_on_full = false;
    bool tune = true;  // false: every cell uses the (overridden) default hyperparameters
    std::map<std::string, classifiers::Grid> grids;    // per-classifier grid replacements
    std::map<std::string, classifiers::Params> params; // per-classifier fixed overrides
    std::vector<int> nca_lambda_exponents = default_nca_exponents();

    static std::vector<Index> default_feature_counts();  // 100, 200, ..., 1300
    static std::vector<int> default_nca_exponents();     // 1..20

    /// Throws ConfigError on any broken invariant.
    void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir = {});
ExperimentConfig load_config(const fs::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// TWINBENCH_SEED, when set, replaces the configured seed.
void apply_env_overrides(ExperimentConfig& cfg);

/// Loads (or generates) the dataset for one matter type.
data::Dataset load_matter(const ExperimentConfig& cfg, data::Modality m);

std::string cell_id(data::Modality m, const std::string& classifier, featsel::Criterion c, Index feature_count);

/// The parameter points searched for one cell, in canonical odometer order.
std::vector<classifiers::Params> cell_grid(const ExperimentConfig& cfg, const std::string& classifier,
                                           featsel::Criterion c);

struct RunOptions {
    fs::path out = "results";
    int jobs = 1;
    bool resume = false;
    std::ostream* log = nullptr;
};

struct RunSummary {
    std::size_t total = 0;
    std::size_t computed = 0;
    std::size_t reused = 0;
    std::size_t failed = 0;
    std::vector<std::string> failures;
};

/// Runs the lattice, then writes tables, curves and the manifest.
RunSummary run(const ExperimentConfig& cfg, const RunOptions& opt);

struct StoredCell {
    std::string id;
    bool ok = false;
    std::string error;
    eval::CellResult result;
};

std::vector<StoredCell> load_cells(const fs::path& store);

/// "%.2f" of 100 * v, or the literal NaN.
std::string format_percent(double v);

/// Writes <M>_<N>_results_{lin,nl}.csv (accuracy) plus one pair per other
/// metric (<M>_<N>_<metric>_{lin,nl}.csv) into out_dir. Returns the files.
std::vector<fs::path> emit_tables(const fs::path& store, data::Modality m, Index feature_count, const fs::path& out_dir,
                                  std::ostream* warnings = nullptr);

enum class Grouping { ByFamily, ByCriterion, ByMatter };
std::string to_string(Grouping g);

/// Writes curves_<grouping>.csv and .svg into out_dir.
std::vector<fs::path> emit_curves(const fs::path& store, Grouping g, const fs::path& out_dir);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& p);

/// Rewrites manifest.json from every file under the store (manifest excluded).
void write_manifest(const fs::path& store);
/// file -> hash as recorded in manifest.json (empty when absent).
std::map<std::string, std::string> read_manifest(const fs::path& store);

/// Friedman / Iman-Davenport / Nemenyi on a scores CSV (rows = selection
/// methods, columns = classifiers). Writes friedman.csv, ranks.csv and
/// significant_pairs.csv into out_dir.
std::vector<fs::path> write_stats_report(const fs::path& scores_csv, double alpha, const fs::path& out_dir,
                                         std::ostream* notes = nullptr);

/// rank,feature_id,score,degenerate for one criterion.
void write_ranking(const featsel::Ranking& r, const data::Dataset& ds, const fs::path& out);

}  // namespace twinbench::experiment
