#include "drd/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <numeric>

#include "drd/error.hpp"
#include "drd/kernels.hpp"
#include "drd/ops.hpp"

namespace drd {

namespace {

std::vector<double> flat_gradient(const Tensor& loss, std::span<const Tensor> scope) {
    std::vector<double> flat;
    if (!loss.requires_grad()) {
        for (const auto& p : scope) {
            flat.resize(flat.size() + p.numel(), 0.0);
        }
        return flat;
    }
    for (auto& g : gradients(loss, scope)) {
        flat.insert(flat.end(), g.begin(), g.end());
    }
    return flat;
}

double norm(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

// (n, C, H, W) or (n, C) -> centred (n, C) rows.
std::vector<std::vector<double>> pooled_centred(const Tensor& feature) {
    require(feature.rank() == 2 || feature.rank() == 4, "stage_similarity: features must be (n, C) or (n, C, H, W)");
    const std::size_t n = feature.dim(0), c = feature.dim(1);
    const std::size_t area = feature.rank() == 4 ? feature.dim(2) * feature.dim(3) : 1;
    auto v = feature.data();
    std::vector<std::vector<double>> rows(n, std::vector<double>(c, 0.0));
    std::vector<double> mean(c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (std::size_t p = 0; p < area; ++p) {
                s += v[(i * c + ch) * area + p];
            }
            rows[i][ch] = s / static_cast<double>(area);
            mean[ch] += rows[i][ch] / static_cast<double>(n);
        }
    }
    for (auto& row : rows) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            row[ch] -= mean[ch];
        }
    }
    return rows;
}

// Adaptive average pooling of a vector to `length` bins.
std::vector<double> pool_channels(const std::vector<double>& v, std::size_t length) {
    if (v.size() == length) {
        return v;
    }
    std::vector<double> out(length, 0.0);
    const std::size_t c = v.size();
    for (std::size_t k = 0; k < length; ++k) {
        const std::size_t lo = k * c / length;
        const std::size_t hi = std::max(lo + 1, ((k + 1) * c + length - 1) / length);
        for (std::size_t j = lo; j < hi; ++j) {
            out[k] += v[j];
        }
        out[k] /= static_cast<double>(hi - lo);
    }
    return out;
}

double safe_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (norm(a) == 0.0 || norm(b) == 0.0) {
        return 0.0;
    }
    return kernels::cosine_similarity(a, b);
}

}  // namespace

GradientDiagnosis diagnose_terms(const LossTerms& terms, std::span<const Tensor> scope, const std::string& scope_name) {
    require(!scope.empty(), "gradient diagnosis needs a non-empty parameter scope");
    GradientDiagnosis d;
    d.parameter_scope = scope_name;
    const auto g_sup = flat_gradient(terms.sup, scope);
    const auto g_hybrid = flat_gradient(terms.hybrid, scope);
    const auto g_kd = flat_gradient(terms.kd, scope);
    const auto g_cka = flat_gradient(terms.cka, scope);
    d.sup_norm = norm(g_sup);
    d.hybrid_norm = norm(g_hybrid);
    d.kd_norm = norm(g_kd);
    d.cka_norm = norm(g_cka);
    if (d.sup_norm == 0.0) {
        fail(ErrorKind::zero_vector, "supervised gradient vanishes on " + scope_name);
    }
    if (d.hybrid_norm > 0.0) {
        d.cos_hybrid_vs_sup = kernels::cosine_similarity(g_hybrid, g_sup);
    }
    if (d.kd_norm > 0.0) {
        d.cos_kd_vs_sup = kernels::cosine_similarity(g_kd, g_sup);
    }
    d.cka_to_sup_norm_ratio = d.cka_norm / d.sup_norm;
    return d;
}

GradientDiagnosis gradient_diagnosis(const TrainingState& state, const Tensor& images, const Target& target) {
    const BlockSequence& student = *state.student;
    const std::size_t last = student.size() - 1;
    const LossTerms terms = objective(state, images, target);
    const auto scope = student.block_parameters(last);
    return diagnose_terms(terms, scope, "student.block[" + std::to_string(last) + "]");
}

double SimilarityMatrix::diagonal_mean() const {
    const std::size_t n = std::min(rows, cols);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += at(i, i);
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

double SimilarityMatrix::off_diagonal_mean() const {
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (i != j) {
                s += at(i, j);
                ++count;
            }
        }
    }
    return count == 0 ? 0.0 : s / static_cast<double>(count);
}

SimilarityMatrix stage_similarity(std::span<const Tensor> teacher_features, std::span<const Tensor> student_features) {
    require(!teacher_features.empty() && !student_features.empty(), "stage_similarity: no stages");
    const std::size_t n = teacher_features.front().dim(0);
    require(n >= 1, "stage_similarity: empty evaluation set");
    for (const auto* list : {&teacher_features, &student_features}) {
        for (const auto& f : *list) {
            require(f.dim(0) == n, "stage_similarity: all stages must cover the same samples");
        }
    }
    std::vector<std::vector<std::vector<double>>> t, s;
    for (const auto& f : teacher_features) {
        t.push_back(pooled_centred(f));
    }
    for (const auto& f : student_features) {
        s.push_back(pooled_centred(f));
    }
    SimilarityMatrix m;
    m.rows = t.size();
    m.cols = s.size();
    m.values.assign(m.rows * m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            const std::size_t len = std::min(t[i].front().size(), s[j].front().size());
            double total = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                total += safe_cosine(pool_channels(t[i][k], len), pool_channels(s[j][k], len));
            }
            m.values[i * m.cols + j] = std::clamp(total / static_cast<double>(n), -1.0, 1.0);
        }
    }
    return m;
}

ConvergenceSummary convergence_track(std::span<const double> losses, std::span<const double> metrics,
                                     std::size_t window) {
    require(losses.size() >= 2, "convergence_track: needs at least two epochs");
    require(metrics.empty() || metrics.size() == losses.size(), "convergence_track: metric history length mismatch");
    require(window >= 1, "convergence_track: window must be positive");
    ConvergenceSummary c;
    c.epochs = losses.size();
    c.initial_loss = losses.front();
    c.final_loss = losses.back();
    std::vector<double> smooth(losses.size());
    for (std::size_t k = 0; k < losses.size(); ++k) {
        const std::size_t lo = k + 1 >= window ? k + 1 - window : 0;
        double s = 0.0;
        for (std::size_t j = lo; j <= k; ++j) {
            s += losses[j];
        }
        smooth[k] = s / static_cast<double>(k - lo + 1);
    }
    std::size_t decreases = 0;
    for (std::size_t k = 1; k < smooth.size(); ++k) {
        decreases += smooth[k] < smooth[k - 1] ? 1 : 0;
    }
    c.decrease_fraction = static_cast<double>(decreases) / static_cast<double>(smooth.size() - 1);
    const double limit = c.initial_loss + 9.0 * std::abs(c.initial_loss);
    for (double l : losses) {
        if (!std::isfinite(l) || l > limit) {
            c.diverged = true;
        }
    }
    if (!metrics.empty()) {
        c.final_metric = metrics.back();
        c.best_metric = *std::max_element(metrics.begin(), metrics.end());
    }
    return c;
}

ConvergenceSummary convergence_track(std::span<const EpochRecord> history, std::size_t window) {
    std::vector<double> losses, metrics;
    for (const auto& r : history) {
        losses.push_back(r.mean.l_train);
        metrics.push_back(r.test_metric);
    }
    return convergence_track(losses, metrics, window);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "paired_t_test: samples must have equal length");
    require(a.size() >= 2, "paired_t_test: need at least two pairs");
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] - b[i];
    }
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : d) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
        fail(ErrorKind::degenerate_test, "paired differences have zero variance");
    }
    TTestResult r;
    r.df = n - 1;
    r.mean_difference = mean;
    r.sd_difference = sd;
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const boost::math::students_t dist(static_cast<double>(r.df));
    r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
    return r;
}

OverheadReport measure_overhead(const RunConfig& config, const TaskData& data, const BlockSequence* teacher,
                                std::size_t iterations, std::size_t warmup) {
    require(iterations >= 1, "measure_overhead: needs at least one timed iteration");
    using clock = std::chrono::steady_clock;
    Session session(config, data, teacher);
    OverheadReport report;
    report.iterations = iterations;
    report.warmup = warmup;
    report.student_params = session.student().parameter_count();
    report.projector_params = session.projector_parameter_count();
    report.teacher_params = teacher != nullptr ? teacher->parameter_count() : 0;
    const LossWeights weights = schedule_weights(0, std::max<std::size_t>(config.epochs, 1));
    std::vector<std::vector<std::size_t>> batches;
    std::size_t next = 0;
    double total_ms = 0.0;
    for (std::size_t it = 0; it < warmup + iterations; ++it) {
        if (next == batches.size()) {
            batches = session.next_epoch_batches();
            next = 0;
        }
        const auto t0 = clock::now();
        session.step(batches[next++], weights);
        if (it >= warmup) {
            total_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        }
    }
    report.ms_per_iter = total_ms / static_cast<double>(iterations);
    return report;
}

}  // namespace drd
