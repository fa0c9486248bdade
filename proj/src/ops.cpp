#include "drd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "drd/error.hpp"

namespace drd::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

detail::Node& input(detail::Node& self, std::size_t k) { return *self.inputs[k]; }
bool wants(detail::Node& self, std::size_t k) { return self.inputs[k]->requires_grad; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                        to_string(b.shape()));
}

template <class F>
Tensor unary(const Tensor& a, F&& value_fn, std::function<void(detail::Node&)> backward) {
    std::vector<double> out(a.numel());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = value_fn(x[i]);
    }
    return make_result(a.shape(), std::move(out), {a}, std::move(backward));
}

struct ConvGeometry {
    std::size_t batch, channels, height, width;
    std::size_t out_channels, kernel, stride, padding;
    std::size_t out_h, out_w;

    std::size_t patch() const { return channels * kernel * kernel; }
    std::size_t positions() const { return out_h * out_w; }
};

// cols is a (patch, ld) row-major matrix; this sample fills `positions`
// columns starting at the pointer passed in.
void im2col(const double* image, const ConvGeometry& g, double* cols, std::size_t ld) {
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                double* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * ld;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
                        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                                            ix < static_cast<long>(g.width);
                        row[oy * g.out_w + ox] =
                            inside ? image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                                           static_cast<std::size_t>(ix)]
                                   : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, const ConvGeometry& g, double* image_grad, std::size_t ld) {
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const double* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * ld;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
                    if (iy < 0 || iy >= static_cast<long>(g.height)) {
                        continue;
                    }
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
                        if (ix < 0 || ix >= static_cast<long>(g.width)) {
                            continue;
                        }
                        image_grad[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                                   static_cast<std::size_t>(ix)] += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}

struct ResizeAxis {
    std::vector<std::size_t> lo, hi;
    std::vector<double> frac;
};

ResizeAxis resize_axis(std::size_t in, std::size_t out) {
    ResizeAxis axis;
    axis.lo.resize(out);
    axis.hi.resize(out);
    axis.frac.resize(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        src = std::max(src, 0.0);
        auto lo = static_cast<std::size_t>(std::floor(src));
        lo = std::min(lo, in - 1);
        axis.lo[o] = lo;
        axis.hi[o] = std::min(lo + 1, in - 1);
        axis.frac[o] = src - static_cast<double>(lo);
    }
    return axis;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] + y[i];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (wants(self, k)) {
                auto& g = input(self, k).grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i];
                }
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] - y[i];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        if (wants(self, 0)) {
            auto& g = input(self, 0).grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (wants(self, 1)) {
            auto& g = input(self, 1).grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] -= self.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] * y[i];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& na = input(self, 0);
        auto& nb = input(self, 1);
        if (na.requires_grad) {
            auto& g = na.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * nb.value[i];
            }
        }
        if (nb.requires_grad) {
            auto& g = nb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * na.value[i];
            }
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    std::vector<double> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] / y[i];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& na = input(self, 0);
        auto& nb = input(self, 1);
        if (na.requires_grad) {
            auto& g = na.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] / nb.value[i];
            }
        }
        if (nb.requires_grad) {
            auto& g = nb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] -= self.grad[i] * self.value[i] / nb.value[i];
            }
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(a, [factor](double v) { return v * factor; }, [factor](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * factor;
        }
    });
}

Tensor add_scalar(const Tensor& a, double offset) {
    return unary(a, [offset](double v) { return v + offset; }, [](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
        }
    });
}

Tensor sqrt(const Tensor& a) {
    return unary(a, [](double v) { return std::sqrt(v); }, [](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * 0.5 / self.value[i];
        }
    });
}

Tensor exp(const Tensor& a) {
    return unary(a, [](double v) { return std::exp(v); }, [](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * self.value[i];
        }
    });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (self.value[i] > 0.0) {
                g[i] += self.grad[i];
            }
        }
    });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) {
        total += v;
    }
    return make_result(Shape{}, {total}, {a}, [](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (double& v : g) {
            v += self.grad[0];
        }
    });
}

Tensor mean(const Tensor& a) {
    require(a.numel() > 0, "mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_per_sample(const Tensor& a) {
    require(a.rank() >= 1 && a.dim(0) > 0, "sum_per_sample needs a batch axis");
    const std::size_t batch = a.dim(0);
    const std::size_t inner = a.numel() / batch;
    std::vector<double> out(batch, 0.0);
    auto x = a.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < inner; ++i) {
            out[b] += x[b * inner + i];
        }
    }
    return make_result(Shape{batch}, std::move(out), {a}, [inner](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i / inner];
        }
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    require(element_count(shape) == a.numel(),
            "reshape " + to_string(a.shape()) + " -> " + to_string(shape) + " changes element count");
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_result(std::move(shape), std::move(out), {a}, [](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
        }
    });
}

Tensor flatten(const Tensor& a) {
    require(a.rank() >= 1, "flatten needs a batch axis");
    return reshape(a, Shape{a.dim(0), a.numel() / a.dim(0)});
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
            "matmul shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    std::vector<double> out(n * m);
    MatMap(out.data(), n, m).noalias() = ConstMatMap(a.data().data(), n, k) * ConstMatMap(b.data().data(), k, m);
    return make_result(Shape{n, m}, std::move(out), {a, b}, [n, k, m](detail::Node& self) {
        auto& na = input(self, 0);
        auto& nb = input(self, 1);
        ConstMatMap dout(self.grad.data(), n, m);
        if (na.requires_grad) {
            MatMap(na.grad_buffer().data(), n, k).noalias() += dout * ConstMatMap(nb.value.data(), k, m).transpose();
        }
        if (nb.requires_grad) {
            MatMap(nb.grad_buffer().data(), k, m).noalias() += ConstMatMap(na.value.data(), n, k).transpose() * dout;
        }
    });
}

Tensor transpose(const Tensor& a) {
    require(a.rank() == 2, "transpose needs a matrix");
    const std::size_t n = a.dim(0), m = a.dim(1);
    std::vector<double> out(n * m);
    MatMap(out.data(), m, n) = ConstMatMap(a.data().data(), n, m).transpose();
    return make_result(Shape{m, n}, std::move(out), {a}, [n, m](detail::Node& self) {
        MatMap(input(self, 0).grad_buffer().data(), n, m) += ConstMatMap(self.grad.data(), m, n).transpose();
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require(x.rank() == 2 && weight.rank() == 2 && x.dim(1) == weight.dim(1),
            "linear shape mismatch " + to_string(x.shape()) + " with weight " + to_string(weight.shape()));
    const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    const bool has_bias = bias.defined();
    if (has_bias) {
        require(bias.numel() == out_dim, "linear bias size mismatch");
    }
    std::vector<double> out(batch * out_dim);
    MatMap y(out.data(), batch, out_dim);
    y.noalias() = ConstMatMap(x.data().data(), batch, in) * ConstMatMap(weight.data().data(), out_dim, in).transpose();
    if (has_bias) {
        auto b = bias.data();
        for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t c = 0; c < out_dim; ++c) {
                y(r, c) += b[c];
            }
        }
    }
    std::vector<Tensor> inputs{x, weight};
    if (has_bias) {
        inputs.push_back(bias);
    }
    return make_result(Shape{batch, out_dim}, std::move(out), std::move(inputs),
                       [batch, in, out_dim, has_bias](detail::Node& self) {
                           ConstMatMap dy(self.grad.data(), batch, out_dim);
                           auto& nx = input(self, 0);
                           auto& nw = input(self, 1);
                           if (nx.requires_grad) {
                               MatMap(nx.grad_buffer().data(), batch, in).noalias() +=
                                   dy * ConstMatMap(nw.value.data(), out_dim, in);
                           }
                           if (nw.requires_grad) {
                               MatMap(nw.grad_buffer().data(), out_dim, in).noalias() +=
                                   dy.transpose() * ConstMatMap(nx.value.data(), batch, in);
                           }
                           if (has_bias && wants(self, 2)) {
                               auto& gb = input(self, 2).grad_buffer();
                               for (std::size_t r = 0; r < batch; ++r) {
                                   for (std::size_t c = 0; c < out_dim; ++c) {
                                       gb[c] += dy(r, c);
                                   }
                               }
                           }
                       });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
    require(x.rank() == 4, "conv2d input must be (B,C,H,W), got " + to_string(x.shape()));
    require(weight.rank() == 4 && weight.dim(1) == x.dim(1) && weight.dim(2) == weight.dim(3),
            "conv2d weight " + to_string(weight.shape()) + " incompatible with input " + to_string(x.shape()));
    require(stride >= 1, "conv2d stride must be positive");
    ConvGeometry g{};
    g.batch = x.dim(0);
    g.channels = x.dim(1);
    g.height = x.dim(2);
    g.width = x.dim(3);
    g.out_channels = weight.dim(0);
    g.kernel = weight.dim(2);
    g.stride = stride;
    g.padding = padding;
    require(g.height + 2 * padding >= g.kernel && g.width + 2 * padding >= g.kernel,
            "conv2d kernel larger than padded input");
    g.out_h = (g.height + 2 * padding - g.kernel) / stride + 1;
    g.out_w = (g.width + 2 * padding - g.kernel) / stride + 1;
    const bool has_bias = bias.defined();
    if (has_bias) {
        require(bias.numel() == g.out_channels, "conv2d bias size mismatch");
    }

    const std::size_t patch = g.patch(), positions = g.positions();
    const std::size_t in_stride = g.channels * g.height * g.width;
    const std::size_t out_stride = g.out_channels * positions;
    const std::size_t columns = g.batch * positions;

    // One GEMM over the whole batch: cols is (patch, B * positions).
    auto cols = std::make_shared<std::vector<double>>(patch * columns);
    const double* xv = x.data().data();
    for (std::size_t b = 0; b < g.batch; ++b) {
        im2col(xv + b * in_stride, g, cols->data() + b * positions, columns);
    }
    RowMatrix y = ConstMatMap(weight.data().data(), g.out_channels, patch) *
                        ConstMatMap(cols->data(), patch, columns);
    if (has_bias) {
        auto bv = bias.data();
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            y.row(static_cast<Eigen::Index>(o)).array() += bv[o];
        }
    }
    std::vector<double> out(g.batch * out_stride);
    for (std::size_t b = 0; b < g.batch; ++b) {
        MatMap(out.data() + b * out_stride, g.out_channels, positions) =
            y.middleCols(static_cast<Eigen::Index>(b * positions), static_cast<Eigen::Index>(positions));
    }

    std::vector<Tensor> inputs{x, weight};
    if (has_bias) {
        inputs.push_back(bias);
    }
    return make_result(
        Shape{g.batch, g.out_channels, g.out_h, g.out_w}, std::move(out), std::move(inputs),
        [g, cols, has_bias, patch, positions, in_stride, out_stride, columns](detail::Node& self) {
            auto& nx = input(self, 0);
            auto& nw = input(self, 1);
            RowMatrix dy(g.out_channels, columns);
            for (std::size_t b = 0; b < g.batch; ++b) {
                dy.middleCols(static_cast<Eigen::Index>(b * positions), static_cast<Eigen::Index>(positions)) =
                    ConstMatMap(self.grad.data() + b * out_stride, g.out_channels, positions);
            }
            if (nw.requires_grad) {
                MatMap(nw.grad_buffer().data(), g.out_channels, patch).noalias() +=
                    dy * ConstMatMap(cols->data(), patch, columns).transpose();
            }
            if (has_bias && wants(self, 2)) {
                auto& gb = input(self, 2).grad_buffer();
                for (std::size_t o = 0; o < g.out_channels; ++o) {
                    gb[o] += dy.row(static_cast<Eigen::Index>(o)).sum();
                }
            }
            if (nx.requires_grad) {
                const RowMatrix dcols = ConstMatMap(nw.value.data(), g.out_channels, patch).transpose() * dy;
                auto& gx = nx.grad_buffer();
                for (std::size_t b = 0; b < g.batch; ++b) {
                    col2im(dcols.data() + b * positions, g, gx.data() + b * in_stride, columns);
                }
            }
        });
}

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    require(x.rank() == 4, "resize_bilinear input must be (B,C,H,W), got " + to_string(x.shape()));
    require(out_h > 0 && out_w > 0, "resize_bilinear target must be non-empty");
    const std::size_t planes = x.dim(0) * x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    if (in_h == out_h && in_w == out_w) {
        return x;
    }
    auto ay = std::make_shared<ResizeAxis>(resize_axis(in_h, out_h));
    auto ax = std::make_shared<ResizeAxis>(resize_axis(in_w, out_w));
    std::vector<double> out(planes * out_h * out_w);
    auto src = x.data();
    for (std::size_t p = 0; p < planes; ++p) {
        const double* plane = src.data() + p * in_h * in_w;
        double* dst = out.data() + p * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const double fy = ay->frac[oy];
            const double* r0 = plane + ay->lo[oy] * in_w;
            const double* r1 = plane + ay->hi[oy] * in_w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const double fx = ax->frac[ox];
                const std::size_t x0 = ax->lo[ox], x1 = ax->hi[ox];
                const double top = r0[x0] * (1.0 - fx) + r0[x1] * fx;
                const double bottom = r1[x0] * (1.0 - fx) + r1[x1] * fx;
                dst[oy * out_w + ox] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    return make_result(Shape{x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {x},
                       [ay, ax, planes, in_h, in_w, out_h, out_w](detail::Node& self) {
                           auto& gx = input(self, 0).grad_buffer();
                           for (std::size_t p = 0; p < planes; ++p) {
                               double* plane = gx.data() + p * in_h * in_w;
                               const double* dy = self.grad.data() + p * out_h * out_w;
                               for (std::size_t oy = 0; oy < out_h; ++oy) {
                                   const double fy = ay->frac[oy];
                                   double* r0 = plane + ay->lo[oy] * in_w;
                                   double* r1 = plane + ay->hi[oy] * in_w;
                                   for (std::size_t ox = 0; ox < out_w; ++ox) {
                                       const double fx = ax->frac[ox];
                                       const double d = dy[oy * out_w + ox];
                                       r0[ax->lo[ox]] += d * (1.0 - fy) * (1.0 - fx);
                                       r0[ax->hi[ox]] += d * (1.0 - fy) * fx;
                                       r1[ax->lo[ox]] += d * fy * (1.0 - fx);
                                       r1[ax->hi[ox]] += d * fy * fx;
                                   }
                               }
                           }
                       });
}

Tensor global_avg_pool(const Tensor& x) {
    require(x.rank() == 4, "global_avg_pool input must be (B,C,H,W), got " + to_string(x.shape()));
    const std::size_t planes = x.dim(0) * x.dim(1), area = x.dim(2) * x.dim(3);
    std::vector<double> out(planes, 0.0);
    auto src = x.data();
    for (std::size_t p = 0; p < planes; ++p) {
        double total = 0.0;
        for (std::size_t i = 0; i < area; ++i) {
            total += src[p * area + i];
        }
        out[p] = total / static_cast<double>(area);
    }
    return make_result(Shape{x.dim(0), x.dim(1)}, std::move(out), {x}, [area](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        const double inv = 1.0 / static_cast<double>(area);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i / area] * inv;
        }
    });
}

Tensor log_softmax(const Tensor& x) {
    require(x.rank() >= 2, "log_softmax needs rank >= 2, got " + to_string(x.shape()));
    const std::size_t batch = x.dim(0), classes = x.dim(1);
    const std::size_t inner = x.numel() / (batch * classes);
    std::vector<double> out(x.numel());
    auto src = x.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t s = 0; s < inner; ++s) {
            const std::size_t base = b * classes * inner + s;
            double peak = src[base];
            for (std::size_t c = 1; c < classes; ++c) {
                peak = std::max(peak, src[base + c * inner]);
            }
            double total = 0.0;
            for (std::size_t c = 0; c < classes; ++c) {
                total += std::exp(src[base + c * inner] - peak);
            }
            const double log_total = peak + std::log(total);
            for (std::size_t c = 0; c < classes; ++c) {
                out[base + c * inner] = src[base + c * inner] - log_total;
            }
        }
    }
    return make_result(x.shape(), std::move(out), {x}, [batch, classes, inner](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t s = 0; s < inner; ++s) {
                const std::size_t base = b * classes * inner + s;
                double total = 0.0;
                for (std::size_t c = 0; c < classes; ++c) {
                    total += self.grad[base + c * inner];
                }
                for (std::size_t c = 0; c < classes; ++c) {
                    const std::size_t i = base + c * inner;
                    g[i] += self.grad[i] - std::exp(self.value[i]) * total;
                }
            }
        }
    });
}

Tensor softmax(const Tensor& x) { return exp(log_softmax(x)); }

Tensor normalize_per_sample(const Tensor& x, double eps) {
    require(x.rank() >= 2 && x.numel() > 0, "normalize_per_sample expects a batch axis");
    const std::size_t batch = x.dim(0), count = x.numel() / batch;
    auto src = x.data();
    std::vector<double> out(x.numel()), inv_sd(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* v = src.data() + b * count;
        double mu = 0.0;
        for (std::size_t i = 0; i < count; ++i) mu += v[i];
        mu /= static_cast<double>(count);
        double var = 0.0;
        for (std::size_t i = 0; i < count; ++i) var += (v[i] - mu) * (v[i] - mu);
        var /= static_cast<double>(count);
        inv_sd[b] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < count; ++i) out[b * count + i] = (v[i] - mu) * inv_sd[b];
    }
    std::vector<double> y = out;
    return make_result(x.shape(), std::move(out), {x}, [y = std::move(y), inv_sd, batch, count](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        // dx = (g - mean(g) - y mean(g y)) / sd
        for (std::size_t b = 0; b < batch; ++b) {
            const double* gy = self.grad.data() + b * count;
            const double* yb = y.data() + b * count;
            double mg = 0.0, mgy = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                mg += gy[i];
                mgy += gy[i] * yb[i];
            }
            mg /= static_cast<double>(count);
            mgy /= static_cast<double>(count);
            for (std::size_t i = 0; i < count; ++i) g[b * count + i] += (gy[i] - mg - yb[i] * mgy) * inv_sd[b];
        }
    });
}

Tensor pick(const Tensor& x, std::span<const int> labels) {
    require(x.rank() == 2 && x.dim(0) == labels.size(), "pick expects (B,C) with B labels");
    const std::size_t batch = x.dim(0), classes = x.dim(1);
    std::vector<std::size_t> index(batch);
    std::vector<double> out(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        require(labels[b] >= 0 && static_cast<std::size_t>(labels[b]) < classes,
                "label " + std::to_string(labels[b]) + " outside [0, " + std::to_string(classes) + ")");
        index[b] = b * classes + static_cast<std::size_t>(labels[b]);
        out[b] = x.data()[index[b]];
    }
    return make_result(Shape{batch}, std::move(out), {x}, [index](detail::Node& self) {
        auto& g = input(self, 0).grad_buffer();
        for (std::size_t b = 0; b < index.size(); ++b) {
            g[index[b]] += self.grad[b];
        }
    });
}

Tensor select_channel(const Tensor& x, std::size_t channel) {
    require(x.rank() == 4 && channel < x.dim(1), "select_channel expects (B,C,H,W) and a valid channel");
    const std::size_t batch = x.dim(0), channels = x.dim(1), area = x.dim(2) * x.dim(3);
    std::vector<double> out(batch * area);
    auto src = x.data();
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(src.data() + (b * channels + channel) * area, area, out.data() + b * area);
    }
    return make_result(Shape{batch, x.dim(2), x.dim(3)}, std::move(out), {x},
                       [channels, channel, area, batch](detail::Node& self) {
                           auto& g = input(self, 0).grad_buffer();
                           for (std::size_t b = 0; b < batch; ++b) {
                               double* dst = g.data() + (b * channels + channel) * area;
                               for (std::size_t i = 0; i < area; ++i) {
                                   dst[i] += self.grad[b * area + i];
                               }
                           }
                       });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    auto d = sub(a, b);
    return mean(mul(d, d));
}

}  // namespace drd::ops
