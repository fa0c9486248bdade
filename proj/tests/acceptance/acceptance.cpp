// Acceptance run: one PASS/FAIL line per criterion. Runs land in a fresh
// results store so timings include the actual training.

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "drd/allocator.hpp"
#include "drd/diagnostics.hpp"
#include "drd/error.hpp"
#include "drd/harness.hpp"
#include "drd/kernels.hpp"
#include "test_util.hpp"

using namespace drd;
namespace fs = std::filesystem;
using drd::testing::random_tensor;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string fixed(double v, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Tensor from_matrix(const Eigen::MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    }
    return Tensor(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
    Eigen::MatrixXd m(t.dim(0), t.dim(1));
    for (std::size_t r = 0; r < t.dim(0); ++r) {
        for (std::size_t c = 0; c < t.dim(1); ++c) m(r, c) = t.data()[r * t.dim(1) + c];
    }
    return m;
}

Tensor cka_loss_of(const Tensor& x, const Tensor& y) { return kernels::cka_loss(kernels::gram(x), kernels::gram(y)); }

double cka(const Tensor& x, const Tensor& y) { return cka_loss_of(x, y).item(); }

// --- 1 -------------------------------------------------------------------

Outcome cka_suite() {
    Outcome o;
    std::mt19937_64 rng(1001);
    double self_err = 0.0, scale_err = 0.0, orth_err = 0.0, hsic_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({16, 10}, rng), y = random_tensor({16, 7}, rng);
        self_err = std::max(self_err, std::abs(cka(x, x) + 1.0));
        const double base = cka(x, y);
        const double s = 0.1 + 9.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        scale_err = std::max(scale_err, std::abs(cka(from_matrix(s * to_matrix(x)), y) - base));
        const Eigen::MatrixXd q = drd::testing::random_orthogonal(10, rng);
        orth_err = std::max(orth_err, std::abs(cka(from_matrix(to_matrix(x) * q), y) - base));
    }
    for (std::size_t n : {2u, 3u, 4u}) {
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::MatrixXd a = to_matrix(random_tensor({n, n}, rng)), b = to_matrix(random_tensor({n, n}, rng));
            const Eigen::MatrixXd k = a * a.transpose(), l = b * b.transpose();
            Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
            h.array() -= 1.0 / static_cast<double>(n);
            const Eigen::MatrixXd kh = h * k * h, lh = h * l * h;
            double brute = 0.0;
            for (Eigen::Index i = 0; i < kh.size(); ++i) brute += kh.data()[i] * lh.data()[i];
            brute /= static_cast<double>((n - 1) * (n - 1));
            const double got =
                kernels::hsic(kernels::GramMatrix{from_matrix(k)}, kernels::GramMatrix{from_matrix(l)}).item();
            hsic_err = std::max(hsic_err, std::abs(got - brute));
        }
    }
    o.detail << "self |cka+1| " << fmt(self_err) << ", scaling " << fmt(scale_err) << ", orthogonal " << fmt(orth_err)
             << ", hsic vs brute force " << fmt(hsic_err);
    o.check(self_err <= 1e-6, "self-similarity");
    o.check(scale_err <= 1e-6, "scaling invariance");
    o.check(orth_err <= 1e-5, "orthogonal invariance");
    o.check(hsic_err <= 1e-9, "hsic oracle");
    return o;
}

// --- 2 -------------------------------------------------------------------

double max_rel_error(const std::vector<std::vector<double>>& analytic, const std::vector<std::vector<double>>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, drd::testing::relative_error(analytic[i], numeric[i]));
    }
    return worst;
}

Outcome gradient_checks() {
    Outcome o;
    std::mt19937_64 rng(1002);
    std::vector<std::vector<double>> a_cka, n_cka;
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = random_tensor({4, 6}, rng, 1.0, true), y = random_tensor({4, 6}, rng);
        const std::vector<Tensor> wrt{x};
        const auto g = gradients(cka_loss_of(x, y), wrt);
        std::vector<std::size_t> all(24);
        for (std::size_t i = 0; i < 24; ++i) all[i] = i;
        a_cka.push_back(g[0]);
        n_cka.push_back(drd::testing::numeric_gradient(x, all, [&] { return cka(x, y); }, 1e-4));
    }
    const double cka_err = max_rel_error(a_cka, n_cka);

    RunConfig c = reference_config(TaskKind::classification);
    c.method = Method::drd;
    c.task.n_pretrain = 8;
    c.task.n_pretrain_test = 8;
    c.task.n_test = 8;
    const TaskData data = generate_task(c.task);
    const BlockSequence teacher = build_model(c.teacher, 5);
    Session s(c, data, &teacher);
    const auto idx = iota_indices(0, 8);
    const Tensor x = batch_images(data.train, idx);
    const Target t = make_target(data.train, idx, TaskKind::classification);
    const auto st = s.state(schedule_weights(c.epochs / 2, c.epochs));
    auto loss = [&] { return objective(st, x, t).train; };
    std::vector<std::vector<double>> a_proj, n_proj;
    for (const auto& p : s.projectors()) {
        const auto params = p.parameters();
        const auto g = gradients(loss(), params);
        for (std::size_t k = 0; k < params.size(); ++k) {
            const auto pick = drd::testing::sample_indices(params[k].numel(), 4, rng);
            std::vector<double> a;
            for (auto i : pick) a.push_back(g[k][i]);
            a_proj.push_back(a);
            n_proj.push_back(drd::testing::numeric_gradient(params[k], pick, [&] { return loss().item(); }, 1e-5));
        }
    }
    const double proj_err = max_rel_error(a_proj, n_proj);
    o.detail << "cka_loss max rel err " << fmt(cka_err) << " (< 1e-4), l_train vs " << a_proj.size()
             << " projector tensors max rel err " << fmt(proj_err) << " (< 1e-3)";
    o.check(cka_err < 1e-4, "cka gradient");
    o.check(proj_err < 1e-3, "projector gradient");
    return o;
}

// --- 3 -------------------------------------------------------------------

Outcome constructed_equality() {
    Outcome o;
    const RunConfig c = reference_config(TaskKind::classification);
    const BlockSequence net = build_model(c.student, 77);
    const StagePlan plan = partition(net, 4);
    std::vector<Projector> projectors;
    for (const auto& d : stage_dims(net, plan, FeatureDims{c.task.channels, c.task.image_size, c.task.image_size})) {
        ProjectorSpec ps;
        ps.kind = ProjectorKind::resize_1x1;
        ps.in = ps.out = d;
        Projector p = build_projector(ps, 1);
        p.set_identity();
        projectors.push_back(std::move(p));
    }
    const TaskData data = [&] {
        SyntheticTaskSpec spec = c.task;
        spec.n_pretrain = spec.n_pretrain_test = 8;
        return generate_task(spec);
    }();
    std::size_t mismatched = 0, compared = 0;
    double worst_kd = 0.0, worst_cka = 0.0;
    for (std::size_t start = 0; start + 16 <= data.train.size(); start += 16) {
        const auto idx = iota_indices(start, start + 16);
        const HybridForward h = forward_hybrid(net, net, plan, plan, projectors, batch_images(data.train, idx));
        for (const auto& z : h.logits.hybrid_logits) {
            ++compared;
            const auto a = z.data(), b = h.logits.student_logits.data();
            mismatched += !(z.shape() == h.logits.student_logits.shape() && std::equal(a.begin(), a.end(), b.begin()));
        }
        const auto r = total_loss(h.logits, h.features_ts, h.features_s,
                                  make_target(data.train, idx, TaskKind::classification), LossWeights{},
                                  TaskKind::classification)
                           .report;
        worst_kd = std::max(worst_kd, std::abs(r.l_kd));
        worst_cka = std::max(worst_cka, std::abs(r.l_cka + 1.0));
    }
    o.detail << compared - mismatched << "/" << compared << " hybrid logits bitwise equal to z^S, max |L_KD| "
             << fmt(worst_kd) << ", max |L_CKA+1| " << fmt(worst_cka);
    o.check(compared > 0 && mismatched == 0, "bitwise equality");
    o.check(worst_kd == 0.0, "L_KD = 0");
    o.check(worst_cka <= 1e-6, "L_CKA = -1");
    return o;
}

// --- 4-7 -----------------------------------------------------------------

const ArmSummary& arm(const AblationTable& t, const std::string& name) {
    for (const auto& a : t.arms) {
        if (a.name == name) return a;
    }
    throw std::runtime_error("missing arm " + name);
}

Outcome component_ordering(const AblationTable& t, double seconds) {
    Outcome o;
    const auto& v = arm(t, "vanilla");
    const auto& co = arm(t, "co_reprog+kd");
    const auto& full = arm(t, "drd");
    const double gap = full.mean - v.mean;
    const auto tt = paired_t_test(full.metrics, v.metrics);
    o.detail << "vanilla " << fixed(v.mean) << " < co_reprog+kd " << fixed(co.mean) << " < drd " << fixed(full.mean)
             << " (direct_reprog+kd " << fixed(arm(t, "direct_reprog+kd").mean) << "); gap " << fixed(gap)
             << " >= 2.0; paired t " << fixed(tt.t) << ", p " << fmt(tt.p) << " < 0.05; " << fixed(seconds, 0)
             << " s < 900 s";
    o.check(full.mean > co.mean && co.mean > v.mean, "ordering");
    o.check(gap >= 2.0, "gap");
    o.check(tt.p < 0.05, "significance");
    o.check(seconds < 900.0, "runtime");
    return o;
}

Outcome pairing_ablation(const AblationTable& t, double seconds) {
    Outcome o;
    const auto& id = arm(t, "identity");
    const auto& rev = arm(t, "reverse");
    o.detail << "segmentation Dice identity " << fixed(id.mean) << " vs reverse " << fixed(rev.mean) << " (gap "
             << fixed(id.mean - rev.mean) << "; shift_right " << fixed(arm(t, "shift_right").mean) << "); "
             << fixed(seconds, 0) << " s < 1200 s";
    o.check(id.mean > rev.mean, "identity > reverse");
    o.check(seconds < 1200.0, "runtime");
    return o;
}

Outcome depth_stability(const AblationTable& t) {
    Outcome o;
    bool diverged = false;
    for (const auto& a : t.arms) {
        o.detail << a.name << " " << fixed(a.mean) << (a.diverged ? " (diverged)" : "") << "; ";
        diverged = diverged || a.diverged;
    }
    const double n1 = arm(t, "N=1").mean, n4 = arm(t, "N=4").mean;
    o.detail << "N=4 - N=1 = " << fixed(n4 - n1) << " >= -0.5";
    o.check(!diverged, "divergence");
    o.check(n4 >= n1 - 0.5, "depth");
    return o;
}

Outcome gradient_diagnosis_check(const ResultsStore& store, const ArmSummary& drd_arm) {
    Outcome o;
    std::vector<double> ch, ck, ratio;
    for (const auto& id : drd_arm.run_ids) {
        const RunResult r = load_result(store, id);
        for (const auto& d : r.diagnoses) {
            if (d.fraction == 0.5) {
                ch.push_back(d.diagnosis.cos_hybrid_vs_sup.value_or(0.0));
                ck.push_back(d.diagnosis.cos_kd_vs_sup.value_or(0.0));
                ratio.push_back(d.diagnosis.cka_to_sup_norm_ratio);
            }
        }
    }
    const double worst = ratio.empty() ? 0.0 : *std::max_element(ratio.begin(), ratio.end());
    o.detail << "50% snapshot over " << ch.size() << " seeds: cos(hybrid,sup) " << fixed(mean(ch), 3)
             << " > 0, cos(kd,sup) " << fixed(mean(ck), 3) << " > 0, CKA/sup norm ratio " << fixed(100 * mean(ratio))
             << "% (max " << fixed(100 * worst) << "%) < 5%";
    o.check(ch.size() == drd_arm.run_ids.size() && !ch.empty(), "snapshot present");
    o.check(mean(ch) > 0.0, "hybrid cosine");
    o.check(mean(ck) > 0.0, "kd cosine");
    o.check(mean(ratio) < 0.05, "norm ratio");
    return o;
}

// --- 8 -------------------------------------------------------------------

double t_tail_quadrature(double t, double df) {
    const double c = std::exp(std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0)) / std::sqrt(df * std::numbers::pi);
    auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1.0) / 2.0); };
    const int n = 20000;
    const double upper = std::abs(t), h = upper / n;
    double s = pdf(0.0) + pdf(upper);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
    return 1.0 - 2.0 * s * h / 3.0;
}

Outcome statistics_oracle() {
    Outcome o;
    std::mt19937_64 rng(1008);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> len(3, 12);
    double t_err = 0.0, p_err = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int k = len(rng);
        std::vector<double> a(k), b(k);
        const double shift = 0.8 * nd(rng);
        for (int i = 0; i < k; ++i) {
            b[i] = 60.0 + 8.0 * nd(rng);
            a[i] = b[i] + shift + nd(rng);
        }
        double md = 0.0;
        for (int i = 0; i < k; ++i) md += (a[i] - b[i]) / k;
        double ss = 0.0;
        for (int i = 0; i < k; ++i) ss += (a[i] - b[i] - md) * (a[i] - b[i] - md);
        const double t = md / std::sqrt(ss / (k - 1) / k);
        const auto r = paired_t_test(a, b);
        t_err = std::max(t_err, std::abs(r.t - t));
        p_err = std::max(p_err, std::abs(r.p - t_tail_quadrature(t, k - 1)));
    }
    const std::vector<double> d{1, 2, 3, 4}, zero(4, 0.0);
    const auto hand = paired_t_test(d, zero);
    o.detail << "50 random cases: max |dt| " << fmt(t_err) << ", max |dp| " << fmt(p_err) << "; {1,2,3,4}: t "
             << fixed(hand.t, 3) << ", p " << fixed(hand.p, 4);
    o.check(t_err <= 1e-6, "t statistic");
    o.check(p_err <= 1e-4, "p value");
    o.check(std::abs(hand.t - 3.873) <= 5e-4, "hand t");
    o.check(std::abs(hand.p - 0.0305) <= 1e-3, "hand p");
    return o;
}

// --- 9 -------------------------------------------------------------------

Outcome schedule_and_identity(const ResultsStore& store, const std::string& run) {
    Outcome o;
    const RunResult r = load_result(store, run);
    const auto w0 = schedule_weights(0, r.config.epochs);
    std::size_t steps = 0;
    double worst = 0.0;
    bool first_ok = false;
    for (const auto& e : read_jsonl(store.events_path(run))) {
        if (e.at("type") != "step") continue;
        LossReport rep;
        rep.l_sup = e.at("l_sup");
        rep.l_hybrid = e.at("l_hybrid");
        rep.l_kd = e.at("l_kd");
        rep.l_cka = e.at("l_cka");
        rep.l_mimic = e.at("l_mimic");
        rep.l_train = e.at("l_train");
        rep.alpha = e.at("alpha");
        rep.beta = e.at("beta");
        if (steps == 0) first_ok = rep.alpha == 1.0 && rep.beta == 1.0;
        const double sum = rep.l_sup + rep.alpha * rep.l_hybrid + rep.beta * rep.l_kd + rep.l_cka + rep.l_mimic;
        worst = std::max(worst, std::abs(rep.l_train - sum));
        ++steps;
    }

    // Independent end-to-end check of the frozen teacher.
    RunConfig c = r.config;
    c.epochs = 3;
    const TaskData data = generate_task(c.task);
    const BlockSequence teacher = build_model(c.teacher, 9);
    std::vector<std::vector<double>> before;
    for (const auto& p : teacher.parameters()) before.emplace_back(p.data().begin(), p.data().end());
    Session s(c, data, &teacher);
    train(s);
    bool unchanged = true;
    std::size_t k = 0;
    for (const auto& p : teacher.parameters()) {
        unchanged = unchanged && std::equal(p.data().begin(), p.data().end(), before[k++].begin());
    }
    o.detail << "alpha(0) = " << w0.alpha << ", beta(0) = " << w0.beta << ", first logged step at 1: "
             << (first_ok ? "yes" : "no") << "; identity max residual " << fmt(worst) << " over " << steps
             << " logged steps; teacher bitwise unchanged (run record " << (r.teacher_unchanged ? "yes" : "no")
             << ", direct check " << (unchanged ? "yes" : "no") << ")";
    o.check(w0.alpha == 1.0 && w0.beta == 1.0 && first_ok, "initial weights");
    o.check(steps == r.steps && steps > 0, "all steps logged");
    o.check(worst <= 1e-6, "identity");
    o.check(unchanged && r.teacher_unchanged, "teacher frozen");
    return o;
}

// --- 10 ------------------------------------------------------------------

std::size_t hand_projector_count(const ProjectorSpec& s) {
    const std::size_t ci = s.in.channels, co = s.out.channels, h = s.hidden_width ? s.hidden_width : co;
    return ci * h * 9 + h + h * h * 9 + h + h * co + co;
}

Outcome overhead(const RunConfig& base, const TaskData& data, const BlockSequence& teacher) {
    Outcome o;
    RunConfig with = base, without = base;
    with.method = Method::drd;
    without.method = Method::drd_no_cka;
    std::vector<double> t_with, t_without;
    OverheadReport rep;
    for (int round = 0; round < 5; ++round) {
        t_without.push_back(measure_overhead(without, data, &teacher, 30, 5).ms_per_iter);
        rep = measure_overhead(with, data, &teacher, 30, 5);
        t_with.push_back(rep.ms_per_iter);
    }
    std::sort(t_with.begin(), t_with.end());
    std::sort(t_without.begin(), t_without.end());
    const double a = t_with[2], b = t_without[2];
    const double increase = a / b - 1.0;

    Session s(with, data, &teacher);
    std::size_t hand_total = 0;
    bool each = true;
    for (const auto& p : s.projectors()) {
        const std::size_t h = hand_projector_count(p.spec());
        hand_total += h;
        each = each && p.param_count() == h && analytic_param_count(p.spec()) == h;
    }
    o.detail << "median ms/iter drd " << fixed(a) << " vs drd_no_cka " << fixed(b) << ": +" << fixed(100 * increase, 1)
             << "% < 25%; projector params " << rep.projector_params << " = hand count " << hand_total;
    o.check(increase < 0.25, "overhead");
    o.check(each && rep.projector_params == hand_total, "param counts");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Acceptance criteria"};
    std::string results = "acceptance_results";
    bool keep = false;
    std::vector<int> only;
    app.add_option("--results", results, "Results store (wiped unless --keep)");
    app.add_flag("--keep", keep, "Reuse an existing store");
    app.add_option("--only", only, "Criteria to run");
    CLI11_PARSE(app, argc, argv);

    if (!keep) fs::remove_all(results);
    const ResultsStore store{fs::path(results)};
    RunOptions options;
    options.store = store;
    options.log = [](const std::string& m) { std::cerr << "  " << m << '\n'; };
    const std::vector<std::uint64_t> seeds{0, 1, 2, 3};
    auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

    std::vector<std::pair<int, bool>> summary;
    auto report_line = [&](int k, const std::string& name, auto&& body) {
        if (!wanted(k)) return;
        const auto t0 = Clock::now();
        bool pass = false;
        std::string detail;
        try {
            Outcome o = body();
            pass = o.pass;
            detail = o.detail.str();
        } catch (const std::exception& e) {
            detail = std::string("error: ") + e.what();
        }
        std::cout << (pass ? "PASS" : "FAIL") << "  " << k << ". " << name << ": " << detail << " ("
                  << fixed(seconds_since(t0), 1) << " s)" << std::endl;
        summary.emplace_back(k, pass);
    };

    RunConfig cls = reference_config(TaskKind::classification);
    cls.method = Method::drd;
    RunConfig seg = reference_config(TaskKind::segmentation);
    seg.method = Method::drd;

    report_line(1, "CKA suite", [&] { return cka_suite(); });
    report_line(2, "gradient checks", [&] { return gradient_checks(); });
    report_line(3, "constructed-equality oracle", [&] { return constructed_equality(); });

    // Shared setup: datasets and teachers are cached in the store and not
    // counted in the per-criterion training budgets.
    std::optional<TaskData> cls_data;
    std::optional<TeacherHandle> cls_teacher;
    auto prepare = [&](const RunConfig& c) {
        const auto t0 = Clock::now();
        TaskData d = load_or_generate_task(store, c.task, options.log);
        TeacherHandle t = load_or_pretrain_teacher(store, c, d, options.log);
        std::cerr << "setup " << to_string(c.task.kind) << ": teacher held-out " << fixed(t.report.heldout_metric)
                  << " after " << t.report.epochs_run << " epochs, " << fixed(seconds_since(t0), 1) << " s\n";
        return std::make_pair(std::move(d), std::move(t));
    };
    if (wanted(4) || wanted(6) || wanted(7) || wanted(9) || wanted(10)) {
        auto [d, t] = prepare(cls);
        cls_data = std::move(d);
        cls_teacher = std::move(t);
    }

    std::optional<AblationTable> components;
    double components_seconds = 0.0;
    if (wanted(4) || wanted(7) || wanted(9)) {
        const auto t0 = Clock::now();
        try {
            components = ablation_suite("components", cls, seeds, options);
            std::cerr << format_table(*components);
        } catch (const std::exception& e) {
            std::cerr << "components suite failed: " << e.what() << '\n';
        }
        components_seconds = seconds_since(t0);
    }
    report_line(4, "component ordering", [&] {
        if (!components) throw std::runtime_error("components suite did not complete");
        return component_ordering(*components, components_seconds);
    });

    report_line(5, "pairing ablation", [&] {
        prepare(seg);
        const auto t0 = Clock::now();
        const AblationTable t = ablation_suite("pairing", seg, seeds, options);
        std::cerr << format_table(t);
        return pairing_ablation(t, seconds_since(t0));
    });

    report_line(6, "depth stability", [&] {
        const AblationTable t = ablation_suite("depth", cls, seeds, options);
        std::cerr << format_table(t);
        return depth_stability(t);
    });

    report_line(7, "gradient diagnosis", [&] {
        if (!components) throw std::runtime_error("components suite did not complete");
        return gradient_diagnosis_check(store, arm(*components, "drd"));
    });

    report_line(8, "statistics oracle", [&] { return statistics_oracle(); });

    report_line(9, "schedule and loss identity", [&] {
        if (!components) throw std::runtime_error("components suite did not complete");
        return schedule_and_identity(store, arm(*components, "drd").run_ids.front());
    });

    report_line(10, "CKA overhead and projector counts",
                [&] { return overhead(cls, *cls_data, cls_teacher->model); });

    std::size_t passed = 0;
    for (const auto& [k, ok] : summary) passed += ok;
    std::cout << passed << "/" << summary.size() << " criteria passed" << std::endl;
    return passed == summary.size() ? 0 : 1;
}
