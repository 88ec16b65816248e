// SPDX-License-Identifier: Apache-2.0
#include "tensorvault/lineage.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "tensorvault/errors.hpp"

namespace tv {

namespace {

using nlohmann::json;

// A usable base identifier names a concrete model ("org/name" or a dotted
// versioned name), not just a family ("Llama"). Bare single words are
// treated as family mentions and flagged ambiguous.
bool looks_concrete(const std::string& id) {
    if (id.find('/') != std::string::npos) return true;
    return id.find_first_of("0123456789") != std::string::npos &&
           id.find('-') != std::string::npos;
}

// Regular-expression set over model cards, in priority order (see docs).
const std::regex kFrontMatterScalar(R"(^base_model:\s*["']?([^"'\s#]+))",
                                    std::regex::multiline);
const std::regex kFrontMatterList(R"(^base_model:\s*\n\s*-\s*["']?([^"'\s#]+))",
                                  std::regex::multiline);
const std::regex kProseMention(
    R"((?:fine[- ]?tuned?\s+(?:from|of|version of)|based\s+on)\s+\[?`?([A-Za-z0-9_.\-]+/[A-Za-z0-9_.\-]+))");

const char* kJsonBaseFields[] = {"base_model", "base_model_name_or_path", "parent_model"};

struct Candidate {
    int rank; // lower wins
    std::string id;
    bool ambiguous;
};

void scan_markdown(const std::string& text, std::vector<Candidate>& out) {
    std::smatch m;
    if (std::regex_search(text, m, kFrontMatterScalar)) {
        std::string id = m[1].str();
        out.push_back({0, id, !looks_concrete(id)});
    } else if (std::regex_search(text, m, kFrontMatterList)) {
        std::string id = m[1].str();
        out.push_back({0, id, !looks_concrete(id)});
    }
    if (std::regex_search(text, m, kProseMention))
        out.push_back({2, m[1].str(), false});
}

void scan_json(const std::string& text, std::vector<Candidate>& out) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception&) {
        return; // malformed metadata -> no candidate
    }
    if (!doc.is_object()) return;
    for (const char* field : kJsonBaseFields) {
        if (!doc.contains(field)) continue;
        const auto& v = doc[field];
        std::string id;
        if (v.is_string())
            id = v.get<std::string>();
        else if (v.is_array() && !v.empty() && v[0].is_string())
            id = v[0].get<std::string>();
        if (!id.empty()) out.push_back({1, id, !looks_concrete(id)});
    }
}

} // namespace

ContentId shapes_digest(std::span<const NamedTensorView> tensors) {
    std::vector<std::string> rows;
    rows.reserve(tensors.size());
    for (const auto& t : tensors) {
        std::ostringstream row;
        row << t.name << '\0' << t.dtype.label << '\0' << t.dtype.width << '\0';
        for (auto d : t.shape) row << d << ',';
        row << '\n';
        rows.push_back(row.str());
    }
    std::sort(rows.begin(), rows.end());
    Sha256 h;
    for (const auto& r : rows) h.update(as_view(r));
    return h.finish();
}

ModelRecord make_model_record(const std::string& model_id,
                              std::span<const NamedTensorView> tensors) {
    ModelRecord rec;
    rec.model_id = model_id;
    rec.shapes_digest = shapes_digest(tensors);
    for (const auto& t : tensors) {
        std::uint64_t numel = 1;
        for (auto d : t.shape) numel *= d;
        rec.param_count += numel;
        rec.dtype_summary[t.dtype.label] += numel;
    }
    return rec;
}

DeclaredBase extract_declared_base(
    const std::vector<std::pair<std::string, Bytes>>& metadata_files) {
    std::vector<Candidate> candidates;
    for (const auto& [name, bytes] : metadata_files) {
        std::string text(bytes.begin(), bytes.end());
        if (name.size() >= 3 && name.ends_with(".md"))
            scan_markdown(text, candidates);
        else if (name.ends_with(".json"))
            scan_json(text, candidates);
    }
    DeclaredBase result;
    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
        if (c.ambiguous) {
            result.ambiguous = true;
            continue;
        }
        if (!best || c.rank < best->rank) best = &c;
    }
    if (best) {
        result.id = best->id;
        result.ambiguous = false;
    }
    return result;
}

std::vector<const ModelRecord*> candidate_bases(const ModelRecord& model,
                                                std::span<const ModelRecord> registry) {
    std::vector<const ModelRecord*> out;
    for (const auto& rec : registry) {
        if (!rec.is_base) continue;
        if (rec.model_id == model.model_id) continue;
        if (rec.shapes_digest != model.shapes_digest) continue;
        out.push_back(&rec);
    }
    std::sort(out.begin(), out.end(),
              [](const ModelRecord* a, const ModelRecord* b) { return a->seq < b->seq; });
    return out;
}

const char* to_string(FamilyMethod m) {
    switch (m) {
        case FamilyMethod::Declared: return "declared";
        case FamilyMethod::BitDistance: return "bit_distance";
        case FamilyMethod::None: return "none";
    }
    return "none";
}

FamilyMethod family_method_from_string(const std::string& s) {
    if (s == "declared") return FamilyMethod::Declared;
    if (s == "bit_distance") return FamilyMethod::BitDistance;
    return FamilyMethod::None;
}

FamilyAssignment assign_family(const ModelRecord& model,
                               std::span<const ModelRecord> registry,
                               double threshold, const DistanceFn& distance) {
    if (!(threshold > 0)) fail(ErrorCode::InvalidArgument, "threshold must be > 0");
    FamilyAssignment a;
    a.model_id = model.model_id;
    a.threshold = threshold;

    if (model.declared_base) {
        for (const auto& rec : registry) {
            if (rec.model_id != *model.declared_base) continue;
            if (rec.shapes_digest == model.shapes_digest &&
                rec.model_id != model.model_id) {
                a.method = FamilyMethod::Declared;
                a.base_id = rec.model_id;
                return a;
            }
            break; // declared base registered but shape-incompatible
        }
    }

    auto candidates = candidate_bases(model, registry);
    const ModelRecord* best = nullptr;
    double best_distance = 0.0;
    for (const auto* cand : candidates) {
        auto report = distance(*cand);
        double d = report.threshold_distance; // BF16-calibrated metric
        if (!best || d < best_distance ||
            (d == best_distance && cand->model_id < best->model_id)) {
            if (best && d == best_distance) a.tie = true;
            best = cand;
            best_distance = d;
        } else if (best && d == best_distance) {
            a.tie = true;
        }
    }
    if (best && best_distance < threshold) {
        a.method = FamilyMethod::BitDistance;
        a.base_id = best->model_id;
        a.distance = best_distance;
    } else {
        a.method = FamilyMethod::None;
        a.tie = false;
    }
    return a;
}

std::vector<SimilarityEdge> build_similarity_graph(std::span<const ModelRecord> registry,
                                                   double threshold,
                                                   const PairDistanceFn& distance) {
    std::vector<SimilarityEdge> edges;
    for (std::size_t i = 0; i < registry.size(); ++i) {
        for (std::size_t j = i + 1; j < registry.size(); ++j) {
            const auto& a = registry[i];
            const auto& b = registry[j];
            if (a.shapes_digest != b.shapes_digest) continue; // shape gate
            auto report = distance(a, b);
            double d = report.threshold_distance;
            if (d < threshold) {
                if (a.model_id <= b.model_id)
                    edges.push_back({a.model_id, b.model_id, d});
                else
                    edges.push_back({b.model_id, a.model_id, d});
            }
        }
    }
    return edges;
}

std::string format_edge_list(std::span<const SimilarityEdge> edges) {
    std::ostringstream out;
    for (const auto& e : edges)
        out << e.model_a << '\t' << e.model_b << '\t' << e.distance << '\n';
    return out.str();
}

std::vector<ThresholdPoint> threshold_sweep(std::span<const LabeledDistance> pairs,
                                            const std::vector<double>& thresholds) {
    std::vector<ThresholdPoint> curve;
    curve.reserve(thresholds.size());
    for (double t : thresholds) {
        std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (const auto& p : pairs) {
            bool predicted = p.distance < t;
            if (predicted && p.same_family) ++tp;
            else if (predicted && !p.same_family) ++fp;
            else if (!predicted && !p.same_family) ++tn;
            else ++fn;
        }
        ThresholdPoint pt;
        pt.threshold = t;
        std::uint64_t total = tp + fp + tn + fn;
        pt.accuracy = total ? double(tp + tn) / double(total) : 0.0;
        pt.precision = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
        pt.recall = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
        pt.f1 = (pt.precision + pt.recall) > 0
                    ? 2 * pt.precision * pt.recall / (pt.precision + pt.recall)
                    : 0.0;
        curve.push_back(pt);
    }
    return curve;
}

} // namespace tv
