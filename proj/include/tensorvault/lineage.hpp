// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tensorvault/bitdist.hpp"
#include "tensorvault/hash.hpp"

namespace tv {

struct ModelRecord {
    std::string model_id;
    ContentId shapes_digest; // hash of the sorted (name, dtype, shape) list
    std::optional<std::string> declared_base;
    std::uint64_t param_count = 0;
    std::map<std::string, std::uint64_t> dtype_summary; // dtype label -> elements
    bool is_base = false; // registered with a base flag or later promoted
    std::uint64_t seq = 0; // registration order
};

ContentId shapes_digest(std::span<const NamedTensorView> tensors);
ModelRecord make_model_record(const std::string& model_id,
                              std::span<const NamedTensorView> tensors);

struct DeclaredBase {
    std::optional<std::string> id;
    bool ambiguous = false; // family named without a concrete base
};

// Scans structured metadata (README.md front matter, JSON config fields)
// for a declared base-model identifier. Malformed metadata yields absent.
DeclaredBase extract_declared_base(
    const std::vector<std::pair<std::string, Bytes>>& metadata_files);

// Registered base models with a matching shapes digest, in registration
// order, excluding the model itself.
std::vector<const ModelRecord*> candidate_bases(const ModelRecord& model,
                                                std::span<const ModelRecord> registry);

enum class FamilyMethod { Declared, BitDistance, None };

const char* to_string(FamilyMethod m);
FamilyMethod family_method_from_string(const std::string& s);

struct FamilyAssignment {
    std::string model_id;
    std::optional<std::string> base_id;
    FamilyMethod method = FamilyMethod::None;
    std::optional<double> distance;
    double threshold = 0.0;
    bool tie = false; // minimal distance shared; broken by lexicographic id
};

inline constexpr double kDefaultThreshold = 4.0; // calibrated for BF16

// Computes the gating distance of `model` against one candidate base.
using DistanceFn = std::function<BitDistanceReport(const ModelRecord& base)>;

FamilyAssignment assign_family(const ModelRecord& model,
                               std::span<const ModelRecord> registry,
                               double threshold, const DistanceFn& distance);

struct SimilarityEdge {
    std::string model_a;
    std::string model_b;
    double distance = 0.0;
};

using PairDistanceFn =
    std::function<BitDistanceReport(const ModelRecord& a, const ModelRecord& b)>;

// Undirected edges between shape-compatible pairs under the threshold.
std::vector<SimilarityEdge> build_similarity_graph(std::span<const ModelRecord> registry,
                                                   double threshold,
                                                   const PairDistanceFn& distance);

// Edge-list format: one line per edge, `model_a<TAB>model_b<TAB>distance`.
std::string format_edge_list(std::span<const SimilarityEdge> edges);

struct LabeledDistance {
    double distance = 0.0;
    bool same_family = false;
};

struct ThresholdPoint {
    double threshold = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Classification quality of "distance < threshold => within-family" over a
// labeled pair set, for each candidate threshold.
std::vector<ThresholdPoint> threshold_sweep(std::span<const LabeledDistance> pairs,
                                            const std::vector<double>& thresholds);

} // namespace tv
