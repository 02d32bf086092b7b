#include "hypercloud/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hypercloud/errors.hpp"

namespace hypercloud {
namespace {

using ordered_json = nlohmann::ordered_json;

struct PairCounts {
    size_t matching = 0;
    size_t total = 0;
    std::array<size_t, 3> pred_count{};
    std::array<size_t, 3> truth_count{};
    std::array<size_t, 3> both_count{};

    void add(const ClassMask& pred, const ClassMask& truth) {
        if (pred.height != truth.height || pred.width != truth.width)
            throw ShapeMismatch("mask dimensions differ");
        for (size_t i = 0; i < pred.labels.size(); ++i) {
            const uint8_t p = pred.labels[i], t = truth.labels[i];
            ++pred_count[p];
            ++truth_count[t];
            if (p == t) {
                ++matching;
                ++both_count[p];
            }
        }
        total += pred.labels.size();
    }

    SegScores scores() const {
        if (total == 0) throw EmptyInput("masks contain no pixels");
        SegScores s;
        s.pixel_accuracy = double(matching) / double(total);
        double sum = 0.0;
        size_t defined = 0;
        for (int c = 0; c < 3; ++c) {
            const size_t denom = pred_count[c] + truth_count[c];
            if (denom == 0) {
                s.dice_per_class[c] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            s.dice_per_class[c] = 2.0 * double(both_count[c]) / double(denom);
            sum += s.dice_per_class[c];
            ++defined;
        }
        s.dice_macro = defined ? sum / double(defined) : 0.0;
        return s;
    }
};

std::string cell(double v, int precision) {
    if (std::isnan(v)) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

ordered_json seg_to_json(const SegScores& s) {
    ordered_json dice_array = ordered_json::array();
    for (double d : s.dice_per_class) {
        if (std::isnan(d))
            dice_array.push_back(nullptr);
        else
            dice_array.push_back(d);
    }
    return ordered_json{{"pixel_accuracy", s.pixel_accuracy},
                        {"dice_per_class", dice_array},
                        {"dice_macro", s.dice_macro}};
}

SegScores seg_from_json(const ordered_json& j) {
    SegScores s;
    s.pixel_accuracy = j.at("pixel_accuracy").get<double>();
    const auto& dice_array = j.at("dice_per_class");
    for (int c = 0; c < 3; ++c)
        s.dice_per_class[c] = dice_array.at(c).is_null()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : dice_array.at(c).get<double>();
    s.dice_macro = j.at("dice_macro").get<double>();
    return s;
}

}  // namespace

double pixel_accuracy(const ClassMask& pred, const ClassMask& truth) {
    PairCounts counts;
    counts.add(pred, truth);
    if (counts.total == 0) throw EmptyInput("masks contain no pixels");
    return double(counts.matching) / double(counts.total);
}

SegScores dice(const ClassMask& pred, const ClassMask& truth) {
    PairCounts counts;
    counts.add(pred, truth);
    return counts.scores();
}

SegScores segmentation_scores(const std::vector<ClassMask>& pred,
                              const std::vector<ClassMask>& truth) {
    if (pred.size() != truth.size()) throw LengthMismatch("mask list lengths differ");
    if (pred.empty()) throw EmptyInput("no masks");
    PairCounts counts;
    for (size_t i = 0; i < pred.size(); ++i) counts.add(pred[i], truth[i]);
    return counts.scores();
}

bool cloudy_decision(const ClassMask& mask, double threshold) {
    if (mask.labels.empty()) throw EmptyInput("empty mask");
    size_t cloudy = 0;
    for (uint8_t v : mask.labels)
        if (v != kClassNoCloud) ++cloudy;
    return double(cloudy) / double(mask.labels.size()) > threshold;
}

ClsScores classification_scores(const std::vector<bool>& preds, const std::vector<bool>& truths) {
    if (preds.size() != truths.size()) throw LengthMismatch("prediction/truth lengths differ");
    if (preds.empty()) throw LengthMismatch("no tiles to score");

    ClsScores s;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] && truths[i]) ++s.tp;
        else if (preds[i] && !truths[i]) ++s.fp;
        else if (!preds[i] && truths[i]) ++s.fn;
        else ++s.tn;
    }
    const size_t n = preds.size();
    s.accuracy = double(s.tp + s.tn) / double(n);
    s.precision = (s.tp + s.fp) ? double(s.tp) / double(s.tp + s.fp) : 0.0;
    s.recall = (s.tp + s.fn) ? double(s.tp) / double(s.tp + s.fn) : 0.0;
    s.f1 = (s.precision + s.recall > 0.0)
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

std::string render_report(const EvalReport& report) {
    if (report.entries.empty()) throw EmptyReport("no evaluation entries");

    std::vector<int> channels;
    std::vector<std::string> models;
    for (const EvalEntry& e : report.entries) {
        if (std::find(channels.begin(), channels.end(), e.channels) == channels.end())
            channels.push_back(e.channels);
        if (std::find(models.begin(), models.end(), e.model) == models.end())
            models.push_back(e.model);
    }
    std::sort(channels.begin(), channels.end());

    auto find_entry = [&](const std::string& model, int ch, const std::string& split) {
        for (const EvalEntry& e : report.entries)
            if (e.model == model && e.channels == ch && e.split == split) return &e;
        return static_cast<const EvalEntry*>(nullptr);
    };
    auto find_bench = [&](const std::string& model, int ch) {
        for (const BenchEntry& b : report.bench)
            if (b.model == model && b.channels == ch) return &b;
        return static_cast<const BenchEntry*>(nullptr);
    };

    std::ostringstream os;
    os << std::left << std::setw(28) << "Number of channels";
    for (int ch : channels) os << std::setw(16) << ch;
    os << "\n" << std::setw(28) << "Set";
    for (size_t i = 0; i < channels.size(); ++i)
        os << std::setw(8) << "Val" << std::setw(8) << "Test";
    os << "\n";

    struct MetricRow {
        const char* label;
        int precision;
        double (*get)(const EvalEntry&);
    };
    const MetricRow rows[] = {
        {"PA [%]", 1, [](const EvalEntry& e) { return e.seg.pixel_accuracy * 100.0; }},
        {"DC", 3, [](const EvalEntry& e) { return e.seg.dice_macro; }},
        {"CA [%]", 1, [](const EvalEntry& e) { return e.cls.accuracy * 100.0; }},
        {"CF1", 3, [](const EvalEntry& e) { return e.cls.f1; }},
    };

    for (const std::string& model : models) {
        os << "--- " << model << " ---\n";
        for (const MetricRow& row : rows) {
            os << std::setw(28) << row.label;
            for (int ch : channels) {
                for (const char* split : {"val", "test"}) {
                    const EvalEntry* e = find_entry(model, ch, split);
                    os << std::setw(8) << (e ? cell(row.get(*e), row.precision) : "-");
                }
            }
            os << "\n";
        }
        struct BenchRow {
            const char* label;
            int precision;
            double (*get)(const BenchEntry&);
        };
        const BenchRow bench_rows[] = {
            {"Size on disk [MB]", 3,
             [](const BenchEntry& b) { return double(b.result.size.bytes_on_disk) / 1e6; }},
            {"Size in memory [MB]", 3,
             [](const BenchEntry& b) { return double(b.result.size.bytes_in_memory) / 1e6; }},
            {"Inference time [s]", 3, [](const BenchEntry& b) { return b.result.mean_seconds; }},
        };
        bool any_bench = false;
        for (int ch : channels) any_bench = any_bench || find_bench(model, ch);
        if (!any_bench) continue;
        for (const BenchRow& row : bench_rows) {
            os << std::setw(28) << row.label;
            for (int ch : channels) {
                const BenchEntry* b = find_bench(model, ch);
                os << std::setw(16) << (b ? cell(row.get(*b), row.precision) : "-");
            }
            os << "\n";
        }
    }
    return os.str();
}

std::string serialize_report(const EvalReport& report) {
    ordered_json j;
    j["schema"] = "evalreport/1";
    j["entries"] = ordered_json::array();
    for (const EvalEntry& e : report.entries) {
        ordered_json je;
        je["model"] = e.model;
        je["channels"] = e.channels;
        je["split"] = e.split;
        je["segmentation"] = seg_to_json(e.seg);
        je["classification"] = ordered_json{
            {"accuracy", e.cls.accuracy}, {"precision", e.cls.precision},
            {"recall", e.cls.recall},     {"f1", e.cls.f1},
            {"tp", e.cls.tp},             {"fp", e.cls.fp},
            {"tn", e.cls.tn},             {"fn", e.cls.fn},
        };
        j["entries"].push_back(std::move(je));
    }
    j["bench"] = ordered_json::array();
    for (const BenchEntry& b : report.bench) {
        ordered_json jb;
        jb["model"] = b.model;
        jb["channels"] = b.channels;
        jb["mean_seconds"] = b.result.mean_seconds;
        jb["min_seconds"] = b.result.min_seconds;
        jb["max_seconds"] = b.result.max_seconds;
        jb["repetitions"] = b.result.repetitions;
        jb["tile_count"] = b.result.tile_count;
        jb["parameter_count"] = b.result.size.parameter_count;
        jb["bytes_in_memory"] = b.result.size.bytes_in_memory;
        jb["bytes_on_disk"] = b.result.size.bytes_on_disk;
        j["bench"].push_back(std::move(jb));
    }
    return j.dump(2) + "\n";
}

EvalReport parse_report(const std::string& text) {
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded()) throw BadMagic("not a JSON document");
    if (!j.contains("schema") || j["schema"] != "evalreport/1")
        throw BadMagic("not an evalreport/1 document");

    EvalReport report;
    for (const auto& je : j.at("entries")) {
        EvalEntry e;
        e.model = je.at("model").get<std::string>();
        e.channels = je.at("channels").get<int>();
        e.split = je.at("split").get<std::string>();
        e.seg = seg_from_json(je.at("segmentation"));
        const auto& jc = je.at("classification");
        e.cls.accuracy = jc.at("accuracy").get<double>();
        e.cls.precision = jc.at("precision").get<double>();
        e.cls.recall = jc.at("recall").get<double>();
        e.cls.f1 = jc.at("f1").get<double>();
        e.cls.tp = jc.at("tp").get<size_t>();
        e.cls.fp = jc.at("fp").get<size_t>();
        e.cls.tn = jc.at("tn").get<size_t>();
        e.cls.fn = jc.at("fn").get<size_t>();
        report.entries.push_back(std::move(e));
    }
    for (const auto& jb : j.at("bench")) {
        BenchEntry b;
        b.model = jb.at("model").get<std::string>();
        b.channels = jb.at("channels").get<int>();
        b.result.mean_seconds = jb.at("mean_seconds").get<double>();
        b.result.min_seconds = jb.at("min_seconds").get<double>();
        b.result.max_seconds = jb.at("max_seconds").get<double>();
        b.result.repetitions = jb.at("repetitions").get<size_t>();
        b.result.tile_count = jb.at("tile_count").get<size_t>();
        b.result.size.parameter_count = jb.at("parameter_count").get<size_t>();
        b.result.size.bytes_in_memory = jb.at("bytes_in_memory").get<size_t>();
        b.result.size.bytes_on_disk = jb.at("bytes_on_disk").get<size_t>();
        report.bench.push_back(std::move(b));
    }
    return report;
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
    os << serialize_report(report);
    if (!os) throw IoFailure("short write to " + path.string());
}

EvalReport load_report(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoFailure("cannot open " + path.string());
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_report(buffer.str());
}

}  // namespace hypercloud
