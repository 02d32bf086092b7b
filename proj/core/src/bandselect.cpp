#include "hypercloud/bandselect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hypercloud/errors.hpp"

namespace hypercloud {
namespace {

constexpr double kDegenerateStd = 1e-12;

Matrix covariance(const Matrix& pixels) {
    const size_t n = pixels.rows, c = pixels.cols;
    std::vector<double> mean(c, 0.0);
    for (size_t r = 0; r < n; ++r)
        for (size_t j = 0; j < c; ++j) mean[j] += pixels.at(r, j);
    for (size_t j = 0; j < c; ++j) mean[j] /= double(n);

    // population (1/N) covariance, matching standardize()
    Matrix cov(c, c);
    for (size_t r = 0; r < n; ++r) {
        for (size_t i = 0; i < c; ++i) {
            const double di = pixels.at(r, i) - mean[i];
            for (size_t j = i; j < c; ++j)
                cov.at(i, j) += di * (pixels.at(r, j) - mean[j]);
        }
    }
    for (size_t i = 0; i < c; ++i)
        for (size_t j = i; j < c; ++j) {
            cov.at(i, j) /= double(n);
            cov.at(j, i) = cov.at(i, j);
        }
    return cov;
}

// Cyclic Jacobi on a symmetric matrix. Eigenvectors come back as columns of V.
void jacobi_eigen(Matrix a, std::vector<double>& eigenvalues, Matrix& v) {
    const size_t n = a.cols;
    v = Matrix(n, n);
    for (size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double frob = 0.0;
    for (double x : a.values) frob += x * x;
    const double tol = 1e-28 * std::max(frob, 1.0);

    constexpr int kMaxSweeps = 64;
    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off <= tol) break;

        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (sweep == kMaxSweeps) throw NonConvergence("Jacobi sweep budget exhausted");

    eigenvalues.resize(n);
    for (size_t i = 0; i < n; ++i) eigenvalues[i] = a.at(i, i);
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// within-cluster argmax over non-degenerate channels; size_t(-1) when none
size_t cluster_argmax(size_t lo, size_t hi, const std::vector<bool>& degenerate,
                      const std::vector<double>& weights) {
    size_t arg = size_t(-1);
    for (size_t k = lo; k <= hi; ++k) {
        if (degenerate[k]) continue;
        if (arg == size_t(-1) || weights[k] > weights[arg]) arg = k;
    }
    return arg;
}

}  // namespace

StandardizeResult standardize(const Matrix& pixels) {
    if (pixels.rows < 2) throw TooFewSamples("standardize needs at least 2 samples");
    const size_t n = pixels.rows, c = pixels.cols;

    StandardizeResult result;
    result.data = Matrix(n, c);
    result.mean.assign(c, 0.0);
    result.stddev.assign(c, 0.0);
    result.degenerate.assign(c, false);

    for (size_t r = 0; r < n; ++r)
        for (size_t j = 0; j < c; ++j) result.mean[j] += pixels.at(r, j);
    for (size_t j = 0; j < c; ++j) result.mean[j] /= double(n);

    for (size_t r = 0; r < n; ++r)
        for (size_t j = 0; j < c; ++j) {
            const double d = pixels.at(r, j) - result.mean[j];
            result.stddev[j] += d * d;
        }
    for (size_t j = 0; j < c; ++j) result.stddev[j] = std::sqrt(result.stddev[j] / double(n));

    for (size_t j = 0; j < c; ++j) {
        if (result.stddev[j] < kDegenerateStd) {
            result.degenerate[j] = true;  // column stays all-zero
            continue;
        }
        for (size_t r = 0; r < n; ++r)
            result.data.at(r, j) = (pixels.at(r, j) - result.mean[j]) / result.stddev[j];
    }
    return result;
}

PcaResult pca(const Matrix& pixels) {
    if (pixels.rows < 2) throw TooFewSamples("pca needs at least 2 samples");
    const size_t c = pixels.cols;

    Matrix v;
    std::vector<double> eigenvalues;
    jacobi_eigen(covariance(pixels), eigenvalues, v);

    std::vector<size_t> order(c);
    for (size_t i = 0; i < c; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return eigenvalues[a] > eigenvalues[b]; });

    PcaResult result;
    result.eigenvalues.resize(c);
    result.eigenvectors = Matrix(c, c);
    for (size_t i = 0; i < c; ++i) {
        result.eigenvalues[i] = eigenvalues[order[i]];
        // sign convention: largest-magnitude component positive
        size_t arg = 0;
        double best = -1.0;
        for (size_t k = 0; k < c; ++k) {
            const double mag = std::abs(v.at(k, order[i]));
            if (mag > best) {
                best = mag;
                arg = k;
            }
        }
        const double sign = v.at(arg, order[i]) < 0.0 ? -1.0 : 1.0;
        for (size_t k = 0; k < c; ++k) result.eigenvectors.at(i, k) = sign * v.at(k, order[i]);
    }
    result.pc1_weights.resize(c);
    for (size_t k = 0; k < c; ++k) result.pc1_weights[k] = std::abs(result.eigenvectors.at(0, k));
    return result;
}

CorrelationClusters correlation_clusters(const Matrix& pixels, double threshold) {
    if (pixels.rows < 2) throw TooFewSamples("correlation needs at least 2 samples");
    const size_t c = pixels.cols;

    StandardizeResult std_result = standardize(pixels);
    CorrelationClusters result;
    result.degenerate_channels = std_result.degenerate;
    result.matrix = Matrix(c, c);

    // Pearson correlation == covariance of standardized channels.
    const size_t n = pixels.rows;
    for (size_t i = 0; i < c; ++i) {
        result.matrix.at(i, i) = 1.0;
        for (size_t j = i + 1; j < c; ++j) {
            if (std_result.degenerate[i] || std_result.degenerate[j]) continue;
            double acc = 0.0;
            for (size_t r = 0; r < n; ++r) acc += std_result.data.at(r, i) * std_result.data.at(r, j);
            acc /= double(n);
            acc = std::clamp(acc, -1.0, 1.0);
            result.matrix.at(i, j) = acc;
            result.matrix.at(j, i) = acc;
        }
    }

    size_t lo = 0;
    for (size_t j = 0; j + 1 < c; ++j) {
        const bool cut = result.matrix.at(j, j + 1) < threshold ||
                         std_result.degenerate[j] || std_result.degenerate[j + 1];
        if (cut) {
            result.clusters.emplace_back(lo, j);
            lo = j + 1;
        }
    }
    if (c > 0) result.clusters.emplace_back(lo, c - 1);
    return result;
}

BandSelection select_single_channel(const PcaResult& pca_result) {
    size_t arg = 0;
    for (size_t k = 1; k < pca_result.pc1_weights.size(); ++k)
        if (pca_result.pc1_weights[k] > pca_result.pc1_weights[arg]) arg = k;

    BandSelection selection;
    selection.channel_indices = {arg};
    selection.provenance = {{-1, 0, pca_result.pc1_weights.size() - 1, pca_result.pc1_weights[arg]}};
    return selection;
}

BandSelection select_per_class_channels(const std::array<Matrix, 3>& pixels_by_class,
                                        double threshold) {
    struct Candidate {
        size_t channel;
        double weight;
        size_t lo, hi;
        int source_class;
    };
    std::vector<Candidate> candidates;

    for (int cls = 0; cls < 3; ++cls) {
        const Matrix& pixels = pixels_by_class[size_t(cls)];
        if (pixels.rows < 2) throw TooFewSamples("class " + std::to_string(cls));

        StandardizeResult std_result = standardize(pixels);
        PcaResult pca_result = pca(std_result.data);
        CorrelationClusters clusters = correlation_clusters(pixels, threshold);

        for (auto [lo, hi] : clusters.clusters) {
            // degenerate channels can never be selected
            size_t arg = cluster_argmax(lo, hi, clusters.degenerate_channels, pca_result.pc1_weights);
            if (arg == size_t(-1)) continue;
            candidates.push_back({arg, pca_result.pc1_weights[arg], lo, hi, cls});
        }
    }

    // Highest weight wins wherever cluster intervals overlap; deterministic
    // tie-break on (channel, class).
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        if (a.channel != b.channel) return a.channel < b.channel;
        return a.source_class < b.source_class;
    });

    std::vector<Candidate> accepted;
    for (const Candidate& cand : candidates) {
        bool blocked = false;
        for (const Candidate& acc : accepted)
            if (cand.lo <= acc.hi && acc.lo <= cand.hi) {
                blocked = true;
                break;
            }
        if (!blocked) accepted.push_back(cand);
    }

    std::sort(accepted.begin(), accepted.end(),
              [](const Candidate& a, const Candidate& b) { return a.channel < b.channel; });

    BandSelection selection;
    for (const Candidate& cand : accepted) {
        selection.channel_indices.push_back(cand.channel);
        selection.provenance.push_back({cand.source_class, cand.lo, cand.hi, cand.weight});
    }
    return selection;
}

BandSelection select_every_second(size_t channels) {
    if (channels < 2) throw TooFewSamples("need at least 2 channels");
    BandSelection selection;
    for (size_t i = 0; i + 1 < channels; i += 2) selection.channel_indices.push_back(i);
    return selection;
}

std::vector<double> replicate_channels(const std::vector<double>& spectrum, size_t repeats) {
    if (spectrum.empty() || repeats == 0) throw EmptyInput("nothing to replicate");
    std::vector<double> out;
    out.reserve(spectrum.size() * repeats);
    for (size_t r = 0; r < repeats; ++r) out.insert(out.end(), spectrum.begin(), spectrum.end());
    return out;
}

void attach_wavelengths(BandSelection& selection, const std::vector<float>& wavelengths_nm) {
    selection.wavelengths_nm.clear();
    for (size_t idx : selection.channel_indices) {
        if (idx >= wavelengths_nm.size())
            throw BandOutOfRange("no wavelength for channel " + std::to_string(idx));
        selection.wavelengths_nm.push_back(double(wavelengths_nm[idx]));
    }
}

void save_band_selection(const BandSelection& selection, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
    os << "bands/1\n";
    os << "count " << selection.channel_indices.size() << "\n";
    for (size_t i = 0; i < selection.channel_indices.size(); ++i) {
        os << "channel " << selection.channel_indices[i];
        os << " wavelength ";
        if (i < selection.wavelengths_nm.size())
            os << format_double(selection.wavelengths_nm[i]);
        else
            os << "-";
        os << " class ";
        if (i < selection.provenance.size()) {
            const ChannelProvenance& prov = selection.provenance[i];
            os << prov.source_class << " cluster " << prov.cluster_lo << " " << prov.cluster_hi
               << " weight " << format_double(prov.pc1_weight);
        } else {
            os << "- cluster - - weight -";
        }
        os << "\n";
    }
    if (!os) throw IoFailure("short write to " + path.string());
}

BandSelection load_band_selection(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoFailure("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "bands/1") throw BadMagic("not a bands file");
    size_t count = 0;
    {
        std::string key;
        if (!std::getline(is, line)) throw IoFailure("missing count line");
        std::istringstream ls(line);
        if (!(ls >> key >> count) || key != "count") throw IoFailure("malformed count line");
    }

    BandSelection selection;
    bool any_wavelength = false, any_provenance = false;
    for (size_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw IoFailure("truncated bands file");
        std::istringstream ls(line);
        std::string kw_channel, kw_wavelength, kw_class, kw_cluster, kw_weight;
        size_t channel;
        std::string wavelength, cls, lo, hi, weight;
        if (!(ls >> kw_channel >> channel >> kw_wavelength >> wavelength >> kw_class >> cls >>
              kw_cluster >> lo >> hi >> kw_weight >> weight) ||
            kw_channel != "channel" || kw_wavelength != "wavelength" || kw_class != "class" ||
            kw_cluster != "cluster" || kw_weight != "weight")
            throw IoFailure("malformed bands line: " + line);
        selection.channel_indices.push_back(channel);
        if (wavelength != "-") {
            selection.wavelengths_nm.push_back(std::stod(wavelength));
            any_wavelength = true;
        }
        if (cls != "-") {
            selection.provenance.push_back(
                {int(std::stol(cls)), size_t(std::stoull(lo)), size_t(std::stoull(hi)), std::stod(weight)});
            any_provenance = true;
        }
    }
    if (!any_wavelength) selection.wavelengths_nm.clear();
    if (!any_provenance) selection.provenance.clear();
    return selection;
}

}  // namespace hypercloud
