#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hypercloud/hypercube.hpp"
#include "hypercloud/pipeline.hpp"

namespace hypercloud {

struct SegScores {
    double pixel_accuracy = 0.0;
    // NaN marks a class absent from both masks (excluded from the macro mean).
    std::array<double, 3> dice_per_class{};
    double dice_macro = 0.0;
};

struct ClsScores {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

double pixel_accuracy(const ClassMask& pred, const ClassMask& truth);

// Per class c: 2|pred=c & truth=c| / (|pred=c| + |truth=c|); also fills
// pixel_accuracy so one call yields the full SegScores.
SegScores dice(const ClassMask& pred, const ClassMask& truth);

// Pooled over all pixels of all pairs.
SegScores segmentation_scores(const std::vector<ClassMask>& pred,
                              const std::vector<ClassMask>& truth);

// True iff the Thin+Thick coverage strictly exceeds the threshold.
bool cloudy_decision(const ClassMask& mask, double threshold = 0.70);

// Cloudy is the positive class.
ClsScores classification_scores(const std::vector<bool>& preds, const std::vector<bool>& truths);

struct EvalEntry {
    std::string model;
    int channels = 0;        // scenario id
    std::string split;       // "val" | "test"
    SegScores seg;
    ClsScores cls;
};

struct BenchEntry {
    std::string model;
    int channels = 0;
    BenchResult result;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    std::vector<BenchEntry> bench;
};

// Text table mirroring the per-model row groups and per-scenario columns of
// the evaluation summary.
std::string render_report(const EvalReport& report);

// Machine-readable serialization, schema "evalreport/1"; round-trips
// losslessly.
std::string serialize_report(const EvalReport& report);
EvalReport parse_report(const std::string& text);

void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

}  // namespace hypercloud
