#include "hypercloud/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hypercloud/errors.hpp"

namespace hypercloud {
namespace {

constexpr double kProbClamp = 1e-12;

void require(bool ok, const char* what) {
    if (!ok) throw ShapeMismatch(what);
}

}  // namespace

Tensor conv1d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    require(input.rank() == 2, "conv1d input must be {L, Cin}");
    require(kernel.rank() == 3, "conv1d kernel must be {k, Cin, Cout}");
    const size_t len = input.extent(0), cin = input.extent(1);
    const size_t k = kernel.extent(0), cout = kernel.extent(2);
    require(kernel.extent(1) == cin, "conv1d kernel Cin mismatch");
    require(bias.size() == cout, "conv1d bias size mismatch");
    if (len < k)
        throw InputTooShort("conv1d input length " + std::to_string(len) + " < kernel " +
                            std::to_string(k));

    const size_t out_len = len - k + 1;
    Tensor out({out_len, cout});
    for (size_t t = 0; t < out_len; ++t) {
        double* o = out.data.data() + t * cout;
        for (size_t c = 0; c < cout; ++c) o[c] = bias[c];
        for (size_t i = 0; i < k; ++i) {
            const double* in_px = input.data.data() + (t + i) * cin;
            const double* w_tap = kernel.data.data() + i * cin * cout;
            for (size_t ci = 0; ci < cin; ++ci) {
                const double a = in_px[ci];
                const double* w = w_tap + ci * cout;
                for (size_t c = 0; c < cout; ++c) o[c] += a * w[c];
            }
        }
    }
    return out;
}

void conv1d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                     Tensor& grad_in, Tensor& grad_kernel, Tensor& grad_bias) {
    const size_t cin = input.extent(1);
    const size_t k = kernel.extent(0), cout = kernel.extent(2);
    const size_t out_len = grad_out.extent(0);
    require(grad_out.rank() == 2 && grad_out.extent(1) == cout, "conv1d grad_out shape");

    grad_in = Tensor(input.shape);
    grad_kernel = Tensor(kernel.shape);
    grad_bias = Tensor({cout});
    for (size_t t = 0; t < out_len; ++t) {
        const double* g = grad_out.data.data() + t * cout;
        for (size_t c = 0; c < cout; ++c) grad_bias[c] += g[c];
        for (size_t i = 0; i < k; ++i) {
            const double* in_px = input.data.data() + (t + i) * cin;
            double* gin_px = grad_in.data.data() + (t + i) * cin;
            const double* w_tap = kernel.data.data() + i * cin * cout;
            double* gw_tap = grad_kernel.data.data() + i * cin * cout;
            for (size_t ci = 0; ci < cin; ++ci) {
                const double a = in_px[ci];
                const double* w = w_tap + ci * cout;
                double* gw = gw_tap + ci * cout;
                double acc = 0.0;
                for (size_t c = 0; c < cout; ++c) {
                    gw[c] += a * g[c];
                    acc += w[c] * g[c];
                }
                gin_px[ci] += acc;
            }
        }
    }
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    require(input.rank() == 3, "conv2d input must be {H, W, Cin}");
    require(kernel.rank() == 4, "conv2d kernel must be {k, k, Cin, Cout}");
    const size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    const size_t k = kernel.extent(0), cout = kernel.extent(3);
    require(kernel.extent(1) == k && k % 2 == 1, "conv2d kernel must be odd square");
    require(kernel.extent(2) == cin, "conv2d kernel Cin mismatch");
    require(bias.size() == cout, "conv2d bias size mismatch");

    const size_t pad = k / 2;
    Tensor out({h, w, cout});

    // Repack taps as wt[kh][co][kw*cin + ci]. For an interior pixel the kw
    // taps of one kernel row read a single contiguous span of the input, so
    // each output channel reduces to one dot product of length k*cin per
    // kernel row -- the form the optimizer vectorizes best.
    const size_t kc = k * cin;
    std::vector<double> wt(k * cout * kc);
    for (size_t kh = 0; kh < k; ++kh)
        for (size_t kw = 0; kw < k; ++kw)
            for (size_t ci = 0; ci < cin; ++ci)
                for (size_t co = 0; co < cout; ++co)
                    wt[(kh * cout + co) * kc + kw * cin + ci] =
                        kernel.data[((kh * k + kw) * cin + ci) * cout + co];

    const size_t ci0 = std::min(pad, w);            // first interior column
    const size_t ci1 = w > pad ? w - pad : 0;       // one past last interior column
    for (size_t r = 0; r < h; ++r) {
        const size_t kh0 = r >= pad ? 0 : pad - r;
        const size_t kh1 = std::min(k, h + pad - r);
        double* out_row = out.data.data() + r * w * cout;

        auto edge_pixel = [&](size_t c) {
            double* o = out_row + c * cout;
            for (size_t co = 0; co < cout; ++co) {
                double acc = bias[co];
                for (size_t kh = kh0; kh < kh1; ++kh) {
                    const size_t kwlo = c >= pad ? 0 : pad - c;
                    const size_t kwhi = std::min(k, w + pad - c);
                    const double* wrow = wt.data() + (kh * cout + co) * kc;
                    const size_t in_r = r + kh - pad;
                    for (size_t kw = kwlo; kw < kwhi; ++kw) {
                        const double* in_p =
                            input.data.data() + (in_r * w + (c + kw - pad)) * cin;
                        const double* wp = wrow + kw * cin;
                        for (size_t ci = 0; ci < cin; ++ci) acc += in_p[ci] * wp[ci];
                    }
                }
                o[co] = acc;
            }
        };

        for (size_t c = 0; c < ci0; ++c) edge_pixel(c);
        for (size_t c = ci0; c < ci1; ++c) {
            double* o = out_row + c * cout;
            for (size_t co = 0; co < cout; ++co) o[co] = bias[co];
        }
        // Kernel row outermost keeps one row of packed taps (cout * k * cin
        // doubles) hot in L1 across the whole image row.
        for (size_t kh = kh0; kh < kh1; ++kh) {
            const double* in_row =
                input.data.data() + (r + kh - pad) * (w * cin);
            for (size_t c = ci0; c < ci1; ++c) {
                const double* in_p = in_row + (c - pad) * cin;
                double* o = out_row + c * cout;
                for (size_t co = 0; co < cout; ++co) {
                    // Eight explicit partial sums: independent chains the
                    // compiler can keep in SIMD registers (a one-accumulator
                    // dot is a serial reduction it must not reorder).
                    double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0;
                    double tail = 0.0;
                    const double* wp = wt.data() + (kh * cout + co) * kc;
                    size_t t = 0;
                    for (; t + 8 <= kc; t += 8) {
                        a0 += in_p[t] * wp[t];
                        a1 += in_p[t + 1] * wp[t + 1];
                        a2 += in_p[t + 2] * wp[t + 2];
                        a3 += in_p[t + 3] * wp[t + 3];
                        a4 += in_p[t + 4] * wp[t + 4];
                        a5 += in_p[t + 5] * wp[t + 5];
                        a6 += in_p[t + 6] * wp[t + 6];
                        a7 += in_p[t + 7] * wp[t + 7];
                    }
                    for (; t < kc; ++t) tail += in_p[t] * wp[t];
                    o[co] += tail + ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7));
                }
            }
        }
        for (size_t c = std::max(ci1, ci0); c < w; ++c) edge_pixel(c);
    }
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                     Tensor& grad_in, Tensor& grad_kernel, Tensor& grad_bias) {
    const size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    const size_t k = kernel.extent(0), cout = kernel.extent(3);
    require(grad_out.rank() == 3 && grad_out.extent(0) == h && grad_out.extent(1) == w &&
                grad_out.extent(2) == cout,
            "conv2d grad_out shape");

    const long pad = long(k) / 2;
    grad_in = Tensor(input.shape);
    grad_kernel = Tensor(kernel.shape);
    grad_bias = Tensor({cout});

    for (size_t p = 0; p < h * w; ++p) {
        const double* g = grad_out.data.data() + p * cout;
        for (size_t c = 0; c < cout; ++c) grad_bias[c] += g[c];
    }
    for (size_t kh = 0; kh < k; ++kh) {
        const long dr = long(kh) - pad;
        const size_t r0 = size_t(std::max<long>(0, -dr));
        const size_t r1 = size_t(std::min<long>(long(h), long(h) - dr));
        for (size_t kw = 0; kw < k; ++kw) {
            const long dc = long(kw) - pad;
            const size_t c0 = size_t(std::max<long>(0, -dc));
            const size_t c1 = size_t(std::min<long>(long(w), long(w) - dc));
            const double* w_tap = kernel.data.data() + (kh * k + kw) * cin * cout;
            double* gw_tap = grad_kernel.data.data() + (kh * k + kw) * cin * cout;
            for (size_t r = r0; r < r1; ++r) {
                const double* in_row = input.data.data() + ((r + size_t(dr)) * w + (c0 + size_t(dc))) * cin;
                double* gin_row = grad_in.data.data() + ((r + size_t(dr)) * w + (c0 + size_t(dc))) * cin;
                const double* g_row = grad_out.data.data() + (r * w + c0) * cout;
                for (size_t c = c0; c < c1; ++c, in_row += cin, gin_row += cin, g_row += cout) {
                    for (size_t ci = 0; ci < cin; ++ci) {
                        const double a = in_row[ci];
                        const double* wp = w_tap + ci * cout;
                        double* gw = gw_tap + ci * cout;
                        double acc = 0.0;
                        for (size_t co = 0; co < cout; ++co) {
                            gw[co] += a * g_row[co];
                            acc += wp[co] * g_row[co];
                        }
                        gin_row[ci] += acc;
                    }
                }
            }
        }
    }
}

Tensor maxpool1d_forward(const Tensor& input, std::vector<size_t>& argmax) {
    require(input.rank() == 2, "maxpool1d input must be {L, C}");
    const size_t len = input.extent(0), ch = input.extent(1);
    if (len < 2) throw ExtentTooSmall("maxpool1d needs length >= 2");

    const size_t out_len = len / 2;
    Tensor out({out_len, ch});
    argmax.assign(out.size(), 0);
    for (size_t t = 0; t < out_len; ++t) {
        const double* a = input.data.data() + (2 * t) * ch;
        const double* b = a + ch;
        for (size_t c = 0; c < ch; ++c) {
            // ties keep the earlier element
            const bool first = a[c] >= b[c];
            out.data[t * ch + c] = first ? a[c] : b[c];
            argmax[t * ch + c] = (2 * t + (first ? 0 : 1)) * ch + c;
        }
    }
    return out;
}

Tensor maxpool2d_forward(const Tensor& input, std::vector<size_t>& argmax) {
    require(input.rank() == 3, "maxpool2d input must be {H, W, C}");
    const size_t h = input.extent(0), w = input.extent(1), ch = input.extent(2);
    if (h < 2 || w < 2) throw ExtentTooSmall("maxpool2d needs extents >= 2");

    const size_t oh = h / 2, ow = w / 2;
    Tensor out({oh, ow, ch});
    argmax.assign(out.size(), 0);
    for (size_t r = 0; r < oh; ++r) {
        for (size_t c = 0; c < ow; ++c) {
            const size_t base[4] = {
                ((2 * r) * w + 2 * c) * ch,
                ((2 * r) * w + 2 * c + 1) * ch,
                ((2 * r + 1) * w + 2 * c) * ch,
                ((2 * r + 1) * w + 2 * c + 1) * ch,
            };
            double* o = out.data.data() + (r * ow + c) * ch;
            size_t* am = argmax.data() + (r * ow + c) * ch;
            for (size_t j = 0; j < ch; ++j) {
                size_t best = base[0] + j;
                double val = input.data[best];
                for (int i = 1; i < 4; ++i) {
                    const double v = input.data[base[i] + j];
                    if (v > val) {
                        val = v;
                        best = base[i] + j;
                    }
                }
                o[j] = val;
                am[j] = best;
            }
        }
    }
    return out;
}

Tensor maxpool_backward(const Tensor& input_like, const Tensor& grad_out,
                        const std::vector<size_t>& argmax) {
    require(grad_out.size() == argmax.size(), "maxpool grad_out vs argmax size");
    Tensor grad_in(input_like.shape);
    for (size_t i = 0; i < argmax.size(); ++i) grad_in.data[argmax[i]] += grad_out.data[i];
    return grad_in;
}

Tensor upsample_nearest_forward(const Tensor& input) {
    require(input.rank() == 3, "upsample input must be {H, W, C}");
    const size_t h = input.extent(0), w = input.extent(1), ch = input.extent(2);
    Tensor out({2 * h, 2 * w, ch});
    for (size_t r = 0; r < h; ++r)
        for (size_t c = 0; c < w; ++c) {
            const double* src = input.data.data() + (r * w + c) * ch;
            for (int dr = 0; dr < 2; ++dr)
                for (int dc = 0; dc < 2; ++dc) {
                    double* dst = out.data.data() + ((2 * r + dr) * 2 * w + 2 * c + dc) * ch;
                    std::copy_n(src, ch, dst);
                }
        }
    return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out) {
    require(grad_out.rank() == 3, "upsample grad must be {H, W, C}");
    const size_t h2 = grad_out.extent(0), w2 = grad_out.extent(1), ch = grad_out.extent(2);
    require(h2 % 2 == 0 && w2 % 2 == 0, "upsample grad extents must be even");
    const size_t h = h2 / 2, w = w2 / 2;
    Tensor grad_in({h, w, ch});
    for (size_t r = 0; r < h; ++r)
        for (size_t c = 0; c < w; ++c) {
            double* dst = grad_in.data.data() + (r * w + c) * ch;
            for (int dr = 0; dr < 2; ++dr)
                for (int dc = 0; dc < 2; ++dc) {
                    const double* src = grad_out.data.data() + ((2 * r + dr) * w2 + 2 * c + dc) * ch;
                    for (size_t j = 0; j < ch; ++j) dst[j] += src[j];
                }
        }
    return grad_in;
}

Tensor concat_forward(const Tensor& a, const Tensor& b) {
    require(a.rank() == b.rank() && a.rank() >= 1, "concat rank mismatch");
    for (size_t i = 0; i + 1 < a.rank(); ++i)
        require(a.extent(i) == b.extent(i), "concat leading extents differ");

    const size_t ca = a.shape.back(), cb = b.shape.back();
    const size_t groups = a.size() / ca;
    std::vector<size_t> shape = a.shape;
    shape.back() = ca + cb;
    Tensor out(shape);
    for (size_t g = 0; g < groups; ++g) {
        std::copy_n(a.data.data() + g * ca, ca, out.data.data() + g * (ca + cb));
        std::copy_n(b.data.data() + g * cb, cb, out.data.data() + g * (ca + cb) + ca);
    }
    return out;
}

void concat_backward(const Tensor& grad_out, Tensor& grad_a, Tensor& grad_b) {
    const size_t ca = grad_a.shape.back(), cb = grad_b.shape.back();
    const size_t groups = grad_out.size() / (ca + cb);
    for (size_t g = 0; g < groups; ++g) {
        const double* src = grad_out.data.data() + g * (ca + cb);
        double* da = grad_a.data.data() + g * ca;
        double* db = grad_b.data.data() + g * cb;
        for (size_t j = 0; j < ca; ++j) da[j] += src[j];
        for (size_t j = 0; j < cb; ++j) db[j] += src[ca + j];
    }
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape);
    for (size_t i = 0; i < input.size(); ++i) out.data[i] = input.data[i] > 0.0 ? input.data[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_out) {
    require(output.same_shape(grad_out), "relu grad shape");
    Tensor grad_in(output.shape);
    for (size_t i = 0; i < output.size(); ++i)
        grad_in.data[i] = output.data[i] > 0.0 ? grad_out.data[i] : 0.0;
    return grad_in;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require(weights.rank() == 2, "dense weights must be {F, K}");
    const size_t f = weights.extent(0), k = weights.extent(1);
    require(input.size() == f, "dense input size mismatch");
    require(bias.size() == k, "dense bias size mismatch");

    Tensor out({k});
    for (size_t j = 0; j < k; ++j) out.data[j] = bias[j];
    for (size_t i = 0; i < f; ++i) {
        const double a = input.data[i];
        const double* w = weights.data.data() + i * k;
        for (size_t j = 0; j < k; ++j) out.data[j] += a * w[j];
    }
    return out;
}

void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                    Tensor& grad_in, Tensor& grad_weights, Tensor& grad_bias) {
    const size_t f = weights.extent(0), k = weights.extent(1);
    require(grad_out.size() == k, "dense grad_out size");

    grad_in = Tensor(input.shape);
    grad_weights = Tensor(weights.shape);
    grad_bias = grad_out;
    grad_bias.shape = {k};
    for (size_t i = 0; i < f; ++i) {
        const double a = input.data[i];
        const double* w = weights.data.data() + i * k;
        double* gw = grad_weights.data.data() + i * k;
        double acc = 0.0;
        for (size_t j = 0; j < k; ++j) {
            gw[j] += a * grad_out.data[j];
            acc += w[j] * grad_out.data[j];
        }
        grad_in.data[i] = acc;
    }
}

Tensor softmax_forward(const Tensor& input) {
    require(input.rank() >= 1, "softmax needs a class axis");
    const size_t k = input.shape.back();
    const size_t groups = input.size() / k;
    Tensor out(input.shape);
    for (size_t g = 0; g < groups; ++g) {
        const double* in = input.data.data() + g * k;
        double* o = out.data.data() + g * k;
        double hi = in[0];
        for (size_t j = 1; j < k; ++j) hi = std::max(hi, in[j]);
        double sum = 0.0;
        for (size_t j = 0; j < k; ++j) {
            o[j] = std::exp(in[j] - hi);
            sum += o[j];
        }
        for (size_t j = 0; j < k; ++j) o[j] /= sum;
    }
    return out;
}

Tensor softmax_backward(const Tensor& output, const Tensor& grad_out) {
    require(output.same_shape(grad_out), "softmax grad shape");
    const size_t k = output.shape.back();
    const size_t groups = output.size() / k;
    Tensor grad_in(output.shape);
    for (size_t g = 0; g < groups; ++g) {
        const double* p = output.data.data() + g * k;
        const double* go = grad_out.data.data() + g * k;
        double* gi = grad_in.data.data() + g * k;
        double dot = 0.0;
        for (size_t j = 0; j < k; ++j) dot += p[j] * go[j];
        for (size_t j = 0; j < k; ++j) gi[j] = p[j] * (go[j] - dot);
    }
    return grad_in;
}

Tensor dense_softmax_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    return softmax_forward(dense_forward(input, weights, bias));
}

double cross_entropy(const Tensor& probs, const std::vector<uint8_t>& targets) {
    require(probs.rank() >= 1, "cross_entropy needs a class axis");
    const size_t k = probs.shape.back();
    const size_t n = probs.size() / k;
    require(targets.size() == n, "cross_entropy target count");

    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        require(targets[i] < k, "cross_entropy target class out of range");
        loss -= std::log(std::max(probs.data[i * k + targets[i]], kProbClamp));
    }
    return loss / double(n);
}

Tensor cross_entropy_grad(const Tensor& probs, const std::vector<uint8_t>& targets) {
    const size_t k = probs.shape.back();
    const size_t n = probs.size() / k;
    require(targets.size() == n, "cross_entropy target count");

    Tensor grad(probs.shape);
    for (size_t i = 0; i < n; ++i)
        grad.data[i * k + targets[i]] =
            -1.0 / (std::max(probs.data[i * k + targets[i]], kProbClamp) * double(n));
    return grad;
}

}  // namespace hypercloud
