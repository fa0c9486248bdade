#include "drd/cotraining.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "drd/error.hpp"
#include "drd/kernels.hpp"
#include "drd/ops.hpp"

namespace drd {

namespace {

Tensor zero() { return Tensor::scalar(0.0); }

void check_finite(const LossReport& r) {
    for (double v : {r.l_sup, r.l_hybrid, r.l_kd, r.l_cka, r.l_mimic, r.l_train}) {
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "non-finite loss (sup " << r.l_sup << ", hybrid " << r.l_hybrid << ", kd " << r.l_kd << ", cka "
                << r.l_cka << ", mimic " << r.l_mimic << ")";
            fail(ErrorKind::numerical_failure, msg.str());
        }
    }
}

void fill_report(LossTerms& t, const LossWeights& w) {
    t.report.l_sup = t.sup.item();
    t.report.l_hybrid = t.hybrid.item();
    t.report.l_kd = t.kd.item();
    t.report.l_cka = t.cka.item();
    t.report.l_mimic = t.mimic.item();
    t.report.l_train = t.train.item();
    t.report.alpha = w.alpha;
    t.report.beta = w.beta;
    check_finite(t.report);
}

Tensor concat_batches(const std::vector<Tensor>& parts) {
    Shape shape = parts.front().shape();
    shape[0] = 0;
    std::vector<double> values;
    for (const auto& p : parts) {
        shape[0] += p.dim(0);
        values.insert(values.end(), p.data().begin(), p.data().end());
    }
    return Tensor(std::move(shape), std::move(values));
}

Tensor sum_of(const std::vector<Tensor>& terms) {
    Tensor total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) {
        total = ops::add(total, terms[i]);
    }
    return total;
}

Tensor mean_of(const std::vector<Tensor>& terms) {
    return ops::scale(sum_of(terms), 1.0 / static_cast<double>(terms.size()));
}

void require_stage_layout(const BlockSequence& student, const StagePlan& plan_t, const StagePlan& plan_s,
                          std::size_t projector_count, std::size_t feature_count) {
    require(plan_t.n_stages == plan_s.n_stages, "teacher and student plans must share N (" +
                                                    std::to_string(plan_t.n_stages) + " vs " +
                                                    std::to_string(plan_s.n_stages) + ")");
    require(projector_count == plan_t.n_stages, "need one projector per stage");
    require(feature_count == plan_t.n_stages, "need one teacher feature per stage");
    require(student.has_head(), "student needs its head");
    validate(plan_s, student.size());
}

}  // namespace

std::vector<Tensor> teacher_stage_features(const BlockSequence& teacher, const StagePlan& plan_t, const Tensor& batch) {
    NoGradGuard no_grad;
    return stage_outputs(teacher, plan_t, batch);
}

HybridForward forward_hybrid_from_features(const BlockSequence& student, const StagePlan& plan_t,
                                           const StagePlan& plan_s, std::span<const Projector> projectors,
                                           std::span<const Tensor> teacher_features, const Tensor& batch) {
    require_stage_layout(student, plan_t, plan_s, projectors.size(), teacher_features.size());
    HybridForward out;
    const auto student_features = stage_outputs(student, plan_s, batch);
    out.logits.student_logits = student.head().forward(student_features.back());
    for (std::size_t i = 0; i < plan_t.n_stages; ++i) {
        const std::size_t slot = plan_t.pairing[i];
        Tensor injected = reprogram(projectors[i], teacher_features[i]);
        out.logits.hybrid_logits.push_back(
            student.head().forward(student.run_from(injected, plan_s.boundaries[slot] + 1)));
        out.features_ts.push_back(std::move(injected));
        out.features_s.push_back(student_features[slot]);
    }
    return out;
}

HybridForward forward_hybrid(const BlockSequence& teacher, const BlockSequence& student, const StagePlan& plan_t,
                             const StagePlan& plan_s, std::span<const Projector> projectors, const Tensor& batch) {
    require(plan_t.n_stages == plan_s.n_stages, "teacher and student plans must share N");
    const auto features = teacher_stage_features(teacher, plan_t, batch);
    return forward_hybrid_from_features(student, plan_t, plan_s, projectors, features, batch);
}

LossWeights schedule_weights(std::size_t epoch, std::size_t total_epochs) {
    require(total_epochs >= 1, "schedule_weights: total_epochs must be at least 1");
    require(epoch <= total_epochs, "schedule_weights: epoch " + std::to_string(epoch) + " exceeds total " +
                                       std::to_string(total_epochs));
    const double w = 1.0 - static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return LossWeights{w, w, epoch, total_epochs};
}

double identity_residual(const LossReport& r) {
    return std::abs(r.l_train - (r.l_sup + r.alpha * r.l_hybrid + r.beta * r.l_kd + r.l_cka + r.l_mimic));
}

LossTerms total_loss(const LogitsBundle& bundle, std::span<const Tensor> features_ts, std::span<const Tensor> features_s,
                     const Target& target, const LossWeights& weights, TaskKind kind, LossSwitches switches) {
    const std::size_t n = bundle.hybrid_logits.size();
    require(n >= 1, "total_loss: no hybrid logits");
    require(features_ts.size() == n && features_s.size() == n, "total_loss: need one feature pair per stage");
    require(weights.alpha >= 0.0 && weights.beta >= 0.0, "total_loss: weights must be non-negative");
    LossTerms t;
    t.sup = task_loss(bundle.student_logits, target, kind);
    t.hybrid = zero();
    t.kd = zero();
    t.cka = zero();
    t.mimic = zero();
    std::vector<Tensor> hybrid, kd, cka;
    for (std::size_t i = 0; i < n; ++i) {
        const Tensor& z = bundle.hybrid_logits[i];
        if (switches.hybrid) {
            hybrid.push_back(task_loss(z, target, kind));
        }
        if (switches.kd) {
            kd.push_back(kernels::kl_divergence(z, bundle.student_logits));
        }
        if (switches.cka) {
            cka.push_back(kernels::cka_loss(kernels::gram(features_ts[i]), kernels::gram(features_s[i])));
        }
    }
    if (!hybrid.empty()) {
        t.hybrid = sum_of(hybrid);
    }
    if (!kd.empty()) {
        t.kd = sum_of(kd);
    }
    if (!cka.empty()) {
        t.cka = mean_of(cka);
    }
    t.train = ops::add(ops::add(t.sup, ops::scale(t.hybrid, weights.alpha)),
                       ops::add(ops::scale(t.kd, weights.beta), t.cka));
    fill_report(t, weights);
    return t;
}

LossTerms objective_from_features(const TrainingState& s, std::span<const Tensor> teacher_features,
                                  const Tensor& images, const Target& target) {
    const RunConfig& c = *s.config;
    const TaskKind kind = c.task.kind;
    const BlockSequence& student = *s.student;
    switch (c.method) {
        case Method::vanilla: {
            LossTerms t;
            t.sup = task_loss(student.forward(images), target, kind);
            t.hybrid = t.kd = t.cka = t.mimic = zero();
            t.train = t.sup;
            fill_report(t, s.weights);
            return t;
        }
        case Method::drd:
        case Method::drd_no_cka: {
            const auto fwd =
                forward_hybrid_from_features(student, *s.plan_t, *s.plan_s, *s.projectors, teacher_features, images);
            LossSwitches sw;
            sw.cka = c.method == Method::drd;
            return total_loss(fwd.logits, fwd.features_ts, fwd.features_s, target, s.weights, kind, sw);
        }
        case Method::direct_reprog: {
            const StagePlan& pt = *s.plan_t;
            const StagePlan& ps = *s.plan_s;
            require_stage_layout(student, pt, ps, s.projectors->size(), teacher_features.size());
            const auto fs = stage_outputs(student, ps, images);
            const Tensor z_s = student.head().forward(fs.back());
            std::vector<Tensor> kd, mimic;
            for (std::size_t i = 0; i < pt.n_stages; ++i) {
                const std::size_t slot = pt.pairing[i];
                const Tensor injected = reprogram((*s.projectors)[i], teacher_features[i]);
                mimic.push_back(ops::mse(injected, fs[slot].detach()));
                Tensor z;
                {
                    DetachParamsGuard frozen_student;
                    z = student.head().forward(student.run_from(injected, ps.boundaries[slot] + 1));
                }
                kd.push_back(kernels::kl_divergence(z, z_s));
            }
            LossTerms t;
            t.sup = task_loss(z_s, target, kind);
            t.hybrid = t.cka = zero();
            t.kd = sum_of(kd);
            t.mimic = mean_of(mimic);
            t.train = ops::add(ops::add(t.sup, ops::scale(t.kd, s.weights.beta)), t.mimic);
            fill_report(t, s.weights);
            return t;
        }
        case Method::feature_mimic: {
            const StagePlan& pt = *s.plan_t;
            const StagePlan& ps = *s.plan_s;
            require_stage_layout(student, pt, ps, s.projectors->size(), teacher_features.size());
            const auto fs = stage_outputs(student, ps, images);
            std::vector<Tensor> mimic;
            for (std::size_t i = 0; i < pt.n_stages; ++i) {
                mimic.push_back(ops::mse(reprogram((*s.projectors)[i], fs[pt.pairing[i]]), teacher_features[i]));
            }
            LossTerms t;
            t.sup = task_loss(student.head().forward(fs.back()), target, kind);
            t.hybrid = t.kd = t.cka = zero();
            t.mimic = mean_of(mimic);
            t.train = ops::add(t.sup, t.mimic);
            fill_report(t, s.weights);
            return t;
        }
    }
    fail(ErrorKind::invalid_argument, "unhandled method");
}

LossTerms objective(const TrainingState& s, const Tensor& images, const Target& target) {
    std::vector<Tensor> features;
    if (uses_teacher(s.config->method)) {
        require(s.teacher != nullptr, "objective: method needs a teacher");
        features = teacher_stage_features(*s.teacher, *s.plan_t, images);
    }
    return objective_from_features(s, features, images, target);
}

std::vector<ProjectorSpec> projector_specs(const RunConfig& config, const BlockSequence& teacher,
                                           const BlockSequence& student, const StagePlan& plan_t,
                                           const StagePlan& plan_s) {
    const FeatureDims input{config.task.channels, config.task.image_size, config.task.image_size};
    const auto t_dims = stage_dims(teacher, plan_t, input);
    const auto s_dims = stage_dims(student, plan_s, input);
    std::vector<ProjectorSpec> specs;
    for (std::size_t i = 0; i < plan_t.n_stages; ++i) {
        ProjectorSpec spec;
        spec.kind = config.projector;
        spec.hidden_width = config.projector_hidden;
        const FeatureDims& s_dim = s_dims[plan_t.pairing[i]];
        if (config.method == Method::feature_mimic) {
            spec.in = s_dim;
            spec.out = t_dims[i];
        } else {
            spec.in = t_dims[i];
            spec.out = s_dim;
        }
        specs.push_back(spec);
    }
    return specs;
}

Session::Session(const RunConfig& config, const TaskData& data, const BlockSequence* teacher)
    : config_(config),
      data_(data),
      teacher_(teacher),
      kind_(config.task.kind),
      student_(build_model(config.student, derive_seed(config.seed, kStudentSeedTag))),
      batch_rng_(derive_seed(config.seed, kBatchSeedTag)) {
    validate(config);
    require(data.train.size() >= 2, "training split needs at least two samples");
    if (uses_teacher(config.method)) {
        require(teacher != nullptr, std::string(to_string(config.method)) + " needs a teacher");
        plan_t_ = with_pairing(partition(*teacher, config.n_stages, config.teacher_boundaries),
                               make_pairing(config.n_stages, config.pairing));
        plan_s_ = partition(student_, config.n_stages, config.student_boundaries);
        const auto specs = projector_specs(config, *teacher, student_, plan_t_, plan_s_);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            projectors_.push_back(build_projector(specs[i], derive_seed(config.seed, kProjectorSeedTag + i)));
        }
        std::vector<std::vector<Tensor>> chunks(config.n_stages);
        constexpr std::size_t kChunk = 100;
        for (std::size_t start = 0; start < data.train.size(); start += kChunk) {
            const auto idx = iota_indices(start, std::min(data.train.size(), start + kChunk));
            auto feats = teacher_stage_features(*teacher, plan_t_, batch_images(data.train, idx));
            for (std::size_t i = 0; i < feats.size(); ++i) {
                chunks[i].push_back(std::move(feats[i]));
            }
        }
        for (const auto& parts : chunks) {
            train_teacher_features_.push_back(concat_batches(parts));
        }
    } else {
        plan_s_ = partition(student_, std::min(config.n_stages, student_.size()), config.student_boundaries);
    }
    AdamWOptions opts;
    opts.learning_rate = config.learning_rate;
    opts.weight_decay = config.weight_decay;
    optimizer_.emplace(trainable_parameters(), opts);
}

std::vector<Tensor> Session::trainable_parameters() const {
    auto params = student_.parameters();
    for (const auto& p : projectors_) {
        auto more = p.parameters();
        params.insert(params.end(), more.begin(), more.end());
    }
    return params;
}

std::size_t Session::projector_parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : projectors_) {
        total += p.param_count();
    }
    return total;
}

TrainingState Session::state(const LossWeights& weights) const {
    TrainingState s;
    s.config = &config_;
    s.teacher = teacher_;
    s.student = &student_;
    s.plan_t = &plan_t_;
    s.plan_s = &plan_s_;
    s.projectors = &projectors_;
    s.weights = weights;
    return s;
}

std::vector<std::vector<std::size_t>> Session::next_epoch_batches() {
    return epoch_batches(data_.train.size(), config_.batch_size, batch_rng_);
}

LossReport Session::step(std::span<const std::size_t> batch, const LossWeights& weights) {
    optimizer_->zero_grad();
    const Tensor images = batch_images(data_.train, batch);
    const Target target = make_target(data_.train, batch, kind_);
    std::vector<Tensor> features;
    for (const auto& all : train_teacher_features_) {
        features.push_back(gather(all, batch));
    }
    LossTerms terms = objective_from_features(state(weights), features, images, target);
    terms.train.backward();
    optimizer_->step();
    return terms.report;
}

double Session::evaluate_test() const { return evaluate(student_, data_.test, kind_); }

std::pair<std::vector<Tensor>, std::vector<Tensor>> Session::similarity_features(std::size_t count) const {
    NoGradGuard no_grad;
    const auto idx = iota_indices(0, std::min(count, data_.test.size()));
    const Tensor images = batch_images(data_.test, idx);
    std::pair<std::vector<Tensor>, std::vector<Tensor>> out;
    const StagePlan plan_s = partition(student_, config_.n_stages, config_.student_boundaries);
    out.second = stage_outputs(student_, plan_s, images);
    if (teacher_ == nullptr) {
        return out;
    }
    const StagePlan plan_t = uses_teacher(config_.method)
                                 ? plan_t_
                                 : partition(*teacher_, config_.n_stages, config_.teacher_boundaries);
    auto teacher_features = stage_outputs(*teacher_, plan_t, images);
    const bool projected = uses_teacher(config_.method) && config_.method != Method::feature_mimic;
    for (std::size_t i = 0; i < teacher_features.size(); ++i) {
        out.first.push_back(projected ? reprogram(projectors_[i], teacher_features[i]) : teacher_features[i]);
    }
    return out;
}

std::string Session::rng_state() const {
    std::ostringstream out;
    out << batch_rng_;
    return out.str();
}

TrainOutcome train(Session& session, const TrainHooks& hooks,
                   const std::function<void(const TrainOutcome&)>& on_failure) {
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();
    TrainOutcome outcome;
    outcome.initial_metric = session.evaluate_test();
    outcome.final_metric = outcome.initial_metric;
    const std::size_t epochs = session.config().epochs;
    double step_ms = 0.0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const auto epoch_start = clock::now();
        const LossWeights weights = schedule_weights(epoch, epochs);
        EpochRecord record;
        record.epoch = epoch + 1;
        std::size_t count = 0;
        for (const auto& batch : session.next_epoch_batches()) {
            LossReport r;
            const auto t0 = clock::now();
            try {
                r = session.step(batch, weights);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::numerical_failure && on_failure) {
                    outcome.seconds = std::chrono::duration<double>(clock::now() - started).count();
                    on_failure(outcome);
                }
                throw;
            }
            step_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            outcome.steps.push_back(r);
            if (hooks.on_step) {
                hooks.on_step(r);
            }
            record.mean.l_sup += r.l_sup;
            record.mean.l_hybrid += r.l_hybrid;
            record.mean.l_kd += r.l_kd;
            record.mean.l_cka += r.l_cka;
            record.mean.l_mimic += r.l_mimic;
            record.mean.l_train += r.l_train;
            ++count;
        }
        const double inv = 1.0 / static_cast<double>(count);
        for (double* v : {&record.mean.l_sup, &record.mean.l_hybrid, &record.mean.l_kd, &record.mean.l_cka,
                          &record.mean.l_mimic, &record.mean.l_train}) {
            *v *= inv;
        }
        record.mean.alpha = weights.alpha;
        record.mean.beta = weights.beta;
        record.test_metric = session.evaluate_test();
        record.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
        outcome.history.push_back(record);
        outcome.final_metric = record.test_metric;
        if (hooks.on_epoch_end) {
            hooks.on_epoch_end(session, epoch + 1);
        }
    }
    outcome.seconds = std::chrono::duration<double>(clock::now() - started).count();
    outcome.ms_per_step = outcome.steps.empty() ? 0.0 : step_ms / static_cast<double>(outcome.steps.size());
    return outcome;
}

}  // namespace drd
