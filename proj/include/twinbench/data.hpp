#pragma once

#include "twinbench/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace twinbench::data {

enum class Modality { GM, WM, CM };

std::string to_string(Modality m);
Modality parse_modality(const std::string& s);

class DataError : public Error {
public:
    using Error::Error;
};

/// n subjects x d features, labels in {+1 (patient), -1 (control)}.
struct Dataset {
    Matrix x;
    Vector y;
    std::vector<std::string> feature_ids;
    std::vector<std::string> subject_ids;  // may be empty
    Modality modality = Modality::GM;

    Index n() const { return x.rows(); }
    Index d() const { return x.cols(); }
    Index count(double label) const;

    /// Throws DataError when an invariant is broken.
    void validate(bool require_both_classes = true) const;

    Dataset subset_rows(const std::vector<Index>& rows) const;
    Dataset subset_cols(const std::vector<Index>& cols) const;
};

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Writes the layout load_csv reads: optional subject_id, label, features.
void save_csv(const Dataset& ds, const std::filesystem::path& path, const std::string& label_column = "label");

/// Column-concatenates grey- and white-matter features of the same subjects.
Dataset combine_modalities(const Dataset& gm, const Dataset& wm);

struct FoldPlan {
    int k = 0;
    std::vector<int> assignments;  // fold index per subject
    std::uint64_t seed = 0;

    std::vector<Index> test_indices(int fold) const;
    std::vector<Index> train_indices(int fold) const;
};

/// Seeded shuffle per class, then round-robin fold assignment. The second
/// class continues the rotation where the first stopped so fold sizes differ
/// by at most one.
FoldPlan stratified_kfold(const Dataset& ds, int k, std::uint64_t seed);

/// z-score with the train split's mean and population std; near-constant
/// columns (std < 1e-12) become zero in both outputs.
std::pair<Dataset, Dataset> standardize(const Dataset& train, const Dataset& apply_to);

/// Two Gaussian blobs centred at +-separation/2 along every axis.
Dataset make_blobs(Index n, Index d, double separation, std::uint64_t seed);

/// `informative` features shifted by +-shift/2 between classes followed by
/// `noise` pure N(0,1) features. Classes alternate (+1, -1, ...).
Dataset make_informative(Index n, Index informative, Index noise, double shift, std::uint64_t seed);

}  // namespace twinbench::data
