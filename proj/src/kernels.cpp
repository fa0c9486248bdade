#include "drd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "drd/error.hpp"
#include "drd/ops.hpp"

namespace drd::kernels {

namespace {

Tensor centering_matrix(std::size_t n) {
    std::vector<double> h(n * n, -1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        h[i * n + i] += 1.0;
    }
    return Tensor(Shape{n, n}, std::move(h));
}

void require_square(const GramMatrix& k, const char* op) {
    require(k.values.defined() && k.values.rank() == 2 && k.values.dim(0) == k.values.dim(1),
            std::string(op) + ": Gram matrix must be square");
}

}  // namespace

GramMatrix gram(const Tensor& features) {
    require(features.defined() && features.rank() >= 2 && features.dim(0) >= 1 && features.numel() > 0,
            "gram: empty feature matrix");
    Tensor rows = features.rank() == 2 ? features : ops::flatten(features);
    return GramMatrix{ops::matmul(rows, ops::transpose(rows))};
}

GramMatrix center_gram(const GramMatrix& k) {
    require_square(k, "center_gram");
    require(k.size() >= 2, "center_gram: need n >= 2, got " + std::to_string(k.size()));
    Tensor h = centering_matrix(k.size());
    return GramMatrix{ops::matmul(ops::matmul(h, k.values), h)};
}

Tensor hsic(const GramMatrix& k, const GramMatrix& l) {
    require_square(k, "hsic");
    require_square(l, "hsic");
    require(k.size() == l.size(),
            "hsic: size mismatch " + std::to_string(k.size()) + " vs " + std::to_string(l.size()));
    const std::size_t n = k.size();
    require(n >= 2, "hsic: need n >= 2");
    GramMatrix kc = center_gram(k);
    GramMatrix lc = center_gram(l);
    const double norm = static_cast<double>((n - 1) * (n - 1));
    return ops::scale(ops::sum(ops::mul(kc.values, lc.values)), 1.0 / norm);
}

Tensor cka_loss(const GramMatrix& k, const GramMatrix& l) {
    Tensor kl = hsic(k, l);
    Tensor kk = hsic(k, k);
    Tensor ll = hsic(l, l);
    if (!(kk.item() > kCkaEpsilon) || !(ll.item() > kCkaEpsilon)) {
        std::ostringstream msg;
        msg << "cka_loss: self-HSIC too small (K: " << kk.item() << ", L: " << ll.item() << ")";
        fail(ErrorKind::degenerate_features, msg.str());
    }
    return ops::scale(ops::div(kl, ops::sqrt(ops::mul(kk, ll))), -1.0);
}

ProbVector softmax(std::span<const double> logits, std::size_t classes) {
    require(classes >= 1 && logits.size() % classes == 0, "softmax: logits not divisible into rows");
    ProbVector out;
    out.classes = classes;
    out.probs.resize(logits.size());
    for (std::size_t r = 0; r < logits.size() / classes; ++r) {
        const double* row = logits.data() + r * classes;
        double peak = row[0];
        for (std::size_t c = 1; c < classes; ++c) {
            peak = std::max(peak, row[c]);
        }
        double total = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            out.probs[r * classes + c] = std::exp(row[c] - peak);
            total += out.probs[r * classes + c];
        }
        for (std::size_t c = 0; c < classes; ++c) {
            out.probs[r * classes + c] /= total;
        }
    }
    return out;
}

Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits) {
    require(p_logits.shape() == q_logits.shape(), "kl_divergence: shape mismatch " + to_string(p_logits.shape()) +
                                                      " vs " + to_string(q_logits.shape()));
    Tensor p = p_logits, q = q_logits;
    if (p.rank() == 1) {
        p = ops::reshape(p, Shape{1, p.numel()});
        q = ops::reshape(q, Shape{1, q.numel()});
    }
    require(p.rank() >= 2 && p.dim(1) >= 2, "kl_divergence: need at least two classes");
    Tensor log_p = ops::log_softmax(p);
    Tensor log_q = ops::log_softmax(q);
    Tensor pointwise = ops::mul(ops::exp(log_p), ops::sub(log_p, log_q));
    const double positions = static_cast<double>(p.numel() / p.dim(1));
    return ops::scale(ops::sum(pointwise), 1.0 / positions);
}

double kl_divergence(std::span<const double> p_logits, std::span<const double> q_logits) {
    require(p_logits.size() == q_logits.size(), "kl_divergence: length mismatch");
    NoGradGuard no_grad;
    const Shape shape{p_logits.size()};
    return kl_divergence(Tensor(shape, {p_logits.begin(), p_logits.end()}),
                         Tensor(shape, {q_logits.begin(), q_logits.end()}))
        .item();
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require(logits.rank() == 2, "cross_entropy: logits must be (B,C), got " + to_string(logits.shape()));
    require(logits.dim(0) == labels.size(), "cross_entropy: batch/label count mismatch");
    return ops::scale(ops::mean(ops::pick(ops::log_softmax(logits), labels)), -1.0);
}

Tensor dice_loss(const Tensor& pred_probs, const Tensor& target) {
    require(pred_probs.shape() == target.shape(), "dice_loss: shape mismatch " + to_string(pred_probs.shape()) +
                                                      " vs " + to_string(target.shape()));
    require(pred_probs.rank() >= 2 && pred_probs.dim(0) >= 1, "dice_loss: need a batch axis");
    Tensor overlap = ops::sum_per_sample(ops::mul(pred_probs, target));
    Tensor numerator = ops::add_scalar(ops::scale(overlap, 2.0), kDiceSmoothing);
    Tensor denominator =
        ops::add_scalar(ops::add(ops::sum_per_sample(pred_probs), ops::sum_per_sample(target)), kDiceSmoothing);
    return ops::add_scalar(ops::scale(ops::mean(ops::div(numerator, denominator)), -1.0), 1.0);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    require(u.size() == v.size(), "cosine_similarity: length mismatch");
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) {
        fail(ErrorKind::zero_vector, "cosine_similarity: zero vector");
    }
    return std::clamp(dot / std::sqrt(uu * vv), -1.0, 1.0);
}

}  // namespace drd::kernels
