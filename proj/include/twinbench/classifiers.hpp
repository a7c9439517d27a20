#pragma once

// Registry of the benchmark's classifier configurations: identifiers, table
// labels, default hyperparameters and search grids, and a uniform
// train / predict interface over every model family.

#include "twinbench/data.hpp"
#include "twinbench/svmfam.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace twinbench::classifiers {

using Params = std::map<std::string, double>;
using svmfam::Prediction;

struct Axis {
    std::string name;
    std::vector<double> values;
};
using Grid = std::vector<Axis>;

/// Which results file a row belongs to: linear / kernel-free models or Gaussian-kernel variants.
enum class TableFile { Lin, Nl };
std::string to_string(TableFile f);

struct ClassifierInfo {
    std::string id;       // e.g. "twsvm_nl"
    std::string display;  // results-table row label, e.g. "TWSVM (Non-Linear)"
    TableFile file = TableFile::Lin;
    std::string family;   // "SVM-family", "RaF-family", "Networks", "KNN", "KRR"
    Params defaults;
    Grid grid;
    bool uses_seed = false;
};

/// The 23 result-table rows in table order (lin rows first, then nl rows).
const std::vector<ClassifierInfo>& registry();
/// Configurations that are not result-table rows: the kernel SVM and
/// Pin-GTSVM variants and a constant majority-label baseline.
const std::vector<ClassifierInfo>& extras();
/// Looks up registry() then extras(); throws InvalidArgument for unknown ids.
const ClassifierInfo& lookup(const std::string& id);
std::vector<std::string> default_ids();

class Model {
public:
    virtual ~Model() = default;
    virtual Prediction predict(const Matrix& x) const = 0;
};

/// Trains classifier `id` with `params` overlaid on its defaults. Missing
/// tied penalties fall back to their partner (c2 <- c1, c3 <- c1, c4 <- c2).
std::unique_ptr<Model> train(const std::string& id, const data::Dataset& ds, const Params& params,
                             std::uint64_t seed);

/// Cartesian product of the axes over `base`, last axis varying fastest.
std::vector<Params> expand_grid(const Grid& grid, const Params& base = {});

/// Compact "k=v;k=v" rendering with keys sorted (used in outputs and seeds).
std::string describe(const Params& p);

/// Canonical value lists shared by several grids.
std::vector<double> powers(double base, int lo, int hi);

}  // namespace twinbench::classifiers
