#include "painscope/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "painscope/errors.hpp"
#include "painscope/rng.hpp"

namespace painscope {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got shape " + shape_string(t.shape()));
    }
}

// First output index whose input coordinate o*stride + k - pad lands in [0, extent).
inline long first_valid(long k, long pad, long stride) {
    const long num = pad - k;
    return num <= 0 ? 0 : (num + stride - 1) / stride;
}

inline long last_valid(long k, long pad, long stride, long extent, long out_extent) {
    const long num = extent - 1 + pad - k;
    if (num < 0) {
        return -1;
    }
    return std::min(out_extent - 1, num / stride);
}

} // namespace

Var conv2d(Tape& tape, Var input, Var kernels, Var bias, int stride, int padding) {
    const Tensor& x = tape.value(input);
    const Tensor& w = tape.value(kernels);
    const Tensor& b = tape.value(bias);
    require_rank(x, 3, "conv2d input");
    require_rank(w, 4, "conv2d kernels");
    if (stride < 1 || padding < 0) {
        throw ContractError("conv2d: stride must be positive and padding non-negative");
    }
    const long C = static_cast<long>(x.dim(0)), H = static_cast<long>(x.dim(1)),
               W = static_cast<long>(x.dim(2));
    const long F = static_cast<long>(w.dim(0)), kH = static_cast<long>(w.dim(2)),
               kW = static_cast<long>(w.dim(3));
    if (static_cast<long>(w.dim(1)) != C) {
        throw DimensionError("conv2d: input has " + std::to_string(C) + " channels, kernels expect " +
                             std::to_string(w.dim(1)));
    }
    if (b.size() != static_cast<std::size_t>(F)) {
        throw DimensionError("conv2d: bias length " + std::to_string(b.size()) + " != filters " +
                             std::to_string(F));
    }
    if (kH > H + 2 * padding || kW > W + 2 * padding) {
        throw DimensionError("conv2d: kernel " + shape_string(w.shape()) +
                             " larger than padded input " + shape_string(x.shape()));
    }
    const long s = stride, p = padding;
    const long oH = (H + 2 * p - kH) / s + 1;
    const long oW = (W + 2 * p - kW) / s + 1;

    Tensor out(Shape{static_cast<std::size_t>(F), static_cast<std::size_t>(oH),
                     static_cast<std::size_t>(oW)});
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    double* ov = out.values().data();
    for (long f = 0; f < F; ++f) {
        double* of = ov + f * oH * oW;
        std::fill(of, of + oH * oW, b[static_cast<std::size_t>(f)]);
        for (long c = 0; c < C; ++c) {
            const double* xc = xv + c * H * W;
            for (long ky = 0; ky < kH; ++ky) {
                const long oy0 = first_valid(ky, p, s);
                const long oy1 = last_valid(ky, p, s, H, oH);
                for (long kx = 0; kx < kW; ++kx) {
                    const double wk = wv[((f * C + c) * kH + ky) * kW + kx];
                    const long ox0 = first_valid(kx, p, s);
                    const long ox1 = last_valid(kx, p, s, W, oW);
                    for (long oy = oy0; oy <= oy1; ++oy) {
                        const double* xr = xc + (oy * s + ky - p) * W + (kx - p);
                        double* orow = of + oy * oW;
                        if (s == 1) {
                            for (long ox = ox0; ox <= ox1; ++ox) {
                                orow[ox] += wk * xr[ox];
                            }
                        } else {
                            for (long ox = ox0; ox <= ox1; ++ox) {
                                orow[ox] += wk * xr[ox * s];
                            }
                        }
                    }
                }
            }
        }
    }

    return tape.record(std::move(out), {input, kernels, bias}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        const double* xv = t.value(input).values().data();
        const double* wv = t.value(kernels).values().data();
        const bool want_x = t.requires_grad(input);
        const bool want_w = t.requires_grad(kernels);
        double* gx = want_x ? t.grad_buffer(input).data() : nullptr;
        double* gw = want_w ? t.grad_buffer(kernels).data() : nullptr;
        if (t.requires_grad(bias)) {
            auto gb = t.grad_buffer(bias);
            for (long f = 0; f < F; ++f) {
                const double* g = gout.data() + f * oH * oW;
                gb[static_cast<std::size_t>(f)] += std::accumulate(g, g + oH * oW, 0.0);
            }
        }
        if (!want_x && !want_w) {
            return;
        }
        for (long f = 0; f < F; ++f) {
            const double* gf = gout.data() + f * oH * oW;
            for (long c = 0; c < C; ++c) {
                const double* xc = xv + c * H * W;
                double* gxc = want_x ? gx + c * H * W : nullptr;
                for (long ky = 0; ky < kH; ++ky) {
                    const long oy0 = first_valid(ky, p, s);
                    const long oy1 = last_valid(ky, p, s, H, oH);
                    for (long kx = 0; kx < kW; ++kx) {
                        const long widx = ((f * C + c) * kH + ky) * kW + kx;
                        const double wk = wv[widx];
                        const long ox0 = first_valid(kx, p, s);
                        const long ox1 = last_valid(kx, p, s, W, oW);
                        double acc = 0.0;
                        for (long oy = oy0; oy <= oy1; ++oy) {
                            const long offset = (oy * s + ky - p) * W + (kx - p);
                            const double* grow = gf + oy * oW;
                            if (want_w) {
                                const double* xr = xc + offset;
                                if (s == 1) {
                                    for (long ox = ox0; ox <= ox1; ++ox) {
                                        acc += grow[ox] * xr[ox];
                                    }
                                } else {
                                    for (long ox = ox0; ox <= ox1; ++ox) {
                                        acc += grow[ox] * xr[ox * s];
                                    }
                                }
                            }
                            if (want_x) {
                                double* gxr = gxc + offset;
                                if (s == 1) {
                                    for (long ox = ox0; ox <= ox1; ++ox) {
                                        gxr[ox] += wk * grow[ox];
                                    }
                                } else {
                                    for (long ox = ox0; ox <= ox1; ++ox) {
                                        gxr[ox * s] += wk * grow[ox];
                                    }
                                }
                            }
                        }
                        if (want_w) {
                            gw[widx] += acc;
                        }
                    }
                }
            }
        }
    });
}

Var maxpool2d(Tape& tape, Var input, int window, int stride) {
    const Tensor& x = tape.value(input);
    require_rank(x, 3, "maxpool2d input");
    if (window < 1 || stride < 1) {
        throw ContractError("maxpool2d: window and stride must be positive");
    }
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const auto win = static_cast<std::size_t>(window);
    const auto st = static_cast<std::size_t>(stride);
    if (win > H || win > W) {
        throw DimensionError("maxpool2d: window " + std::to_string(window) +
                             " exceeds spatial extent " + shape_string(x.shape()));
    }
    const std::size_t oH = (H - win) / st + 1, oW = (W - win) / st + 1;
    Tensor out(Shape{C, oH, oW});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    const auto xv = x.values();
    std::size_t o = 0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oy = 0; oy < oH; ++oy) {
            for (std::size_t ox = 0; ox < oW; ++ox, ++o) {
                std::size_t best = (c * H + oy * st) * W + ox * st;
                for (std::size_t ky = 0; ky < win; ++ky) {
                    const std::size_t row = (c * H + oy * st + ky) * W + ox * st;
                    for (std::size_t kx = 0; kx < win; ++kx) {
                        if (xv[row + kx] > xv[best]) {
                            best = row + kx;
                        }
                    }
                }
                out[o] = xv[best];
                (*argmax)[o] = best;
            }
        }
    }
    return tape.record(std::move(out), {input}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        auto gx = t.grad_buffer(input);
        for (std::size_t i = 0; i < gout.size(); ++i) {
            gx[(*argmax)[i]] += gout[i];
        }
    });
}

Var relu(Tape& tape, Var input) {
    const Tensor& x = tape.value(input);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    return tape.record(std::move(out), {input}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        const auto xv = t.value(input).values();
        auto gx = t.grad_buffer(input);
        for (std::size_t i = 0; i < gout.size(); ++i) {
            if (xv[i] > 0.0) {
                gx[i] += gout[i];
            }
        }
    });
}

Var dense(Tape& tape, Var input, Var weights, Var bias) {
    const Tensor& x = tape.value(input);
    const Tensor& w = tape.value(weights);
    const Tensor& b = tape.value(bias);
    require_rank(w, 2, "dense weights");
    const std::size_t M = w.dim(0), N = w.dim(1);
    if (x.size() != N) {
        throw DimensionError("dense: input length " + std::to_string(x.size()) +
                             " != weight columns " + std::to_string(N));
    }
    if (b.size() != M) {
        throw DimensionError("dense: bias length " + std::to_string(b.size()) + " != rows " +
                             std::to_string(M));
    }
    Tensor out(Shape{M});
    for (std::size_t m = 0; m < M; ++m) {
        const double* row = w.values().data() + m * N;
        out[m] = std::inner_product(row, row + N, x.values().data(), 0.0) + b[m];
    }
    return tape.record(std::move(out), {input, weights, bias}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        const auto xv = t.value(input).values();
        const auto wv = t.value(weights).values();
        if (t.requires_grad(bias)) {
            auto gb = t.grad_buffer(bias);
            for (std::size_t m = 0; m < M; ++m) {
                gb[m] += gout[m];
            }
        }
        if (t.requires_grad(weights)) {
            auto gw = t.grad_buffer(weights);
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t n = 0; n < N; ++n) {
                    gw[m * N + n] += gout[m] * xv[n];
                }
            }
        }
        if (t.requires_grad(input)) {
            auto gx = t.grad_buffer(input);
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t n = 0; n < N; ++n) {
                    gx[n] += gout[m] * wv[m * N + n];
                }
            }
        }
    });
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.size() < 2) {
        throw DimensionError("softmax needs at least two logits");
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

Var softmax(Tape& tape, Var logits) {
    const Tensor& z = tape.value(logits);
    require_rank(z, 1, "softmax");
    Tensor out(z.shape(), softmax(z.values()));
    return tape.record(std::move(out), {logits}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        const auto y = t.value(result).values();
        double dot = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            dot += gout[i] * y[i];
        }
        auto gz = t.grad_buffer(logits);
        for (std::size_t i = 0; i < y.size(); ++i) {
            gz[i] += y[i] * (gout[i] - dot);
        }
    });
}

double cross_entropy_soft(const LabelDistribution& predicted, const LabelDistribution& target) {
    return -(target.p_no_pain * std::log(predicted.p_no_pain + kLogClamp) +
             target.p_pain * std::log(predicted.p_pain + kLogClamp));
}

Var cross_entropy_soft(Tape& tape, Var probabilities, const LabelDistribution& target) {
    const Tensor& p = tape.value(probabilities);
    if (p.size() != 2) {
        throw DimensionError("cross_entropy_soft expects two probabilities, got shape " +
                             shape_string(p.shape()));
    }
    const double loss = cross_entropy_soft(LabelDistribution{p[0], p[1]}, target);
    return tape.record(Tensor::scalar(loss), {probabilities}, [=](Tape& t, Var result) {
        const double g = t.grad(result)[0];
        const auto pv = t.value(probabilities).values();
        auto gp = t.grad_buffer(probabilities);
        gp[0] += -g * target.p_no_pain / (pv[0] + kLogClamp);
        gp[1] += -g * target.p_pain / (pv[1] + kLogClamp);
    });
}

Var concat_channels(Tape& tape, std::span<const Var> inputs) {
    if (inputs.empty()) {
        throw ContractError("concat_channels needs at least one input");
    }
    const Tensor& first = tape.value(inputs[0]);
    require_rank(first, 3, "concat_channels");
    const std::size_t H = first.dim(1), W = first.dim(2);
    std::size_t channels = 0;
    for (Var v : inputs) {
        const Tensor& t = tape.value(v);
        require_rank(t, 3, "concat_channels");
        if (t.dim(1) != H || t.dim(2) != W) {
            throw DimensionError("concat_channels: spatial extents differ, " +
                                 shape_string(first.shape()) + " vs " + shape_string(t.shape()));
        }
        channels += t.dim(0);
    }
    Tensor out(Shape{channels, H, W});
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (Var v : inputs) {
        const auto vals = tape.value(v).values();
        std::copy(vals.begin(), vals.end(), out.values().begin() + static_cast<long>(offset));
        offsets.push_back(offset);
        offset += vals.size();
    }
    std::vector<Var> parts(inputs.begin(), inputs.end());
    return tape.record(std::move(out), inputs, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (!t.requires_grad(parts[k])) {
                continue;
            }
            auto g = t.grad_buffer(parts[k]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += gout[offsets[k] + i];
            }
        }
    });
}

Var flatten(Tape& tape, Var input) {
    const Tensor& x = tape.value(input);
    return tape.record(x.reshaped(Shape{x.size()}), {input}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        auto gx = t.grad_buffer(input);
        for (std::size_t i = 0; i < gout.size(); ++i) {
            gx[i] += gout[i];
        }
    });
}

Var dropout(Tape& tape, Var input, double rate, bool training, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ContractError("dropout rate must lie in [0, 1)");
    }
    if (!training || rate == 0.0) {
        return input;
    }
    if (rng == nullptr) {
        throw ContractError("training-mode dropout needs a random stream");
    }
    const Tensor& x = tape.value(input);
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(x.size());
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        (*mask)[i] = rng->uniform() < rate ? 0.0 : keep_scale;
        out[i] = x[i] * (*mask)[i];
    }
    return tape.record(std::move(out), {input}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        auto gx = t.grad_buffer(input);
        for (std::size_t i = 0; i < gout.size(); ++i) {
            gx[i] += gout[i] * (*mask)[i];
        }
    });
}

Var sum(Tape& tape, Var input) {
    const auto xv = tape.value(input).values();
    const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
    return tape.record(Tensor::scalar(total), {input}, [=](Tape& t, Var result) {
        const double g = t.grad(result)[0];
        for (double& gx : t.grad_buffer(input)) {
            gx += g;
        }
    });
}

Var add(Tape& tape, Var a, Var b) {
    const Tensor& x = tape.value(a);
    const Tensor& y = tape.value(b);
    if (x.shape() != y.shape()) {
        throw DimensionError("add: shapes " + shape_string(x.shape()) + " and " +
                             shape_string(y.shape()) + " differ");
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + y[i];
    }
    return tape.record(std::move(out), {a, b}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        for (Var v : {a, b}) {
            if (!t.requires_grad(v)) {
                continue;
            }
            auto g = t.grad_buffer(v);
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += gout[i];
            }
        }
    });
}

Var mul(Tape& tape, Var a, Var b) {
    const Tensor& x = tape.value(a);
    const Tensor& y = tape.value(b);
    if (x.shape() != y.shape()) {
        throw DimensionError("mul: shapes " + shape_string(x.shape()) + " and " +
                             shape_string(y.shape()) + " differ");
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * y[i];
    }
    return tape.record(std::move(out), {a, b}, [=](Tape& t, Var result) {
        const auto gout = t.grad(result);
        const auto xv = t.value(a).values();
        const auto yv = t.value(b).values();
        if (t.requires_grad(a)) {
            auto g = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += gout[i] * yv[i];
            }
        }
        if (t.requires_grad(b)) {
            auto g = t.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += gout[i] * xv[i];
            }
        }
    });
}

Var select(Tape& tape, Var input, std::size_t index) {
    const Tensor& x = tape.value(input);
    if (index >= x.size()) {
        throw DimensionError("select: index " + std::to_string(index) + " out of range for " +
                             shape_string(x.shape()));
    }
    return tape.record(Tensor::scalar(x[index]), {input}, [=](Tape& t, Var result) {
        t.grad_buffer(input)[index] += t.grad(result)[0];
    });
}

} // namespace painscope
