#include "drd/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "drd/checkpoint.hpp"
#include "drd/error.hpp"
#include "drd/hashing.hpp"
#include "drd/nn.hpp"

namespace drd {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTeacherInitTag = 0x7ea0;
constexpr std::uint64_t kTeacherOrderTag = 0x7ea1;
constexpr std::size_t kSimilaritySamples = 128;
constexpr std::size_t kDiagnosisBatch = 32;

void say(const LogFn& log, const std::string& message) {
    if (log) {
        log(message);
    }
}

std::string number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

Json to_json(const LossReport& r) {
    return Json{{"l_sup", r.l_sup},     {"l_hybrid", r.l_hybrid}, {"l_kd", r.l_kd}, {"l_cka", r.l_cka},
                {"l_mimic", r.l_mimic}, {"l_train", r.l_train},   {"alpha", r.alpha}, {"beta", r.beta}};
}

LossReport loss_report_from_json(const Json& j) {
    LossReport r;
    r.l_sup = j.at("l_sup");
    r.l_hybrid = j.at("l_hybrid");
    r.l_kd = j.at("l_kd");
    r.l_cka = j.at("l_cka");
    r.l_mimic = j.at("l_mimic");
    r.l_train = j.at("l_train");
    r.alpha = j.at("alpha");
    r.beta = j.at("beta");
    return r;
}

Json to_json(const EpochRecord& e) {
    return Json{{"epoch", e.epoch}, {"loss", to_json(e.mean)}, {"test_metric", e.test_metric}, {"seconds", e.seconds}};
}

EpochRecord epoch_record_from_json(const Json& j) {
    EpochRecord e;
    e.epoch = j.at("epoch");
    e.mean = loss_report_from_json(j.at("loss"));
    e.test_metric = j.at("test_metric");
    e.seconds = j.at("seconds");
    return e;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

Json to_json(const GradientDiagnosis& d) {
    return Json{{"cos_hybrid_vs_sup", optional_number(d.cos_hybrid_vs_sup)},
                {"cos_kd_vs_sup", optional_number(d.cos_kd_vs_sup)},
                {"cka_to_sup_norm_ratio", d.cka_to_sup_norm_ratio},
                {"sup_norm", d.sup_norm},
                {"hybrid_norm", d.hybrid_norm},
                {"kd_norm", d.kd_norm},
                {"cka_norm", d.cka_norm},
                {"parameter_scope", d.parameter_scope}};
}

GradientDiagnosis diagnosis_from_json(const Json& j) {
    GradientDiagnosis d;
    d.cos_hybrid_vs_sup = optional_from(j.at("cos_hybrid_vs_sup"));
    d.cos_kd_vs_sup = optional_from(j.at("cos_kd_vs_sup"));
    d.cka_to_sup_norm_ratio = j.at("cka_to_sup_norm_ratio");
    d.sup_norm = j.at("sup_norm");
    d.hybrid_norm = j.at("hybrid_norm");
    d.kd_norm = j.at("kd_norm");
    d.cka_norm = j.at("cka_norm");
    d.parameter_scope = j.at("parameter_scope");
    return d;
}

Json to_json(const SimilarityMatrix& m) { return Json{{"rows", m.rows}, {"cols", m.cols}, {"values", m.values}}; }

SimilarityMatrix similarity_from_json(const Json& j) {
    SimilarityMatrix m;
    m.rows = j.at("rows");
    m.cols = j.at("cols");
    m.values = j.at("values").get<std::vector<double>>();
    return m;
}

Json to_json(const ConvergenceSummary& c) {
    return Json{{"epochs", c.epochs},
                {"decrease_fraction", c.decrease_fraction},
                {"initial_loss", c.initial_loss},
                {"final_loss", c.final_loss},
                {"final_metric", c.final_metric},
                {"best_metric", c.best_metric},
                {"diverged", c.diverged}};
}

ConvergenceSummary convergence_from_json(const Json& j) {
    ConvergenceSummary c;
    c.epochs = j.at("epochs");
    c.decrease_fraction = j.at("decrease_fraction");
    c.initial_loss = j.at("initial_loss");
    c.final_loss = j.at("final_loss");
    c.final_metric = j.at("final_metric");
    c.best_metric = j.at("best_metric");
    c.diverged = j.at("diverged");
    return c;
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> out;
    for (const auto& p : params) {
        out.emplace_back(p.data().begin(), p.data().end());
    }
    return out;
}

ConvergenceSummary summarize(const std::vector<EpochRecord>& history) {
    if (history.size() >= 2) {
        return convergence_track(history);
    }
    ConvergenceSummary c;
    c.epochs = history.size();
    if (!history.empty()) {
        c.initial_loss = c.final_loss = history.front().mean.l_train;
        c.final_metric = c.best_metric = history.front().test_metric;
        c.diverged = !std::isfinite(c.final_loss);
    }
    return c;
}

}  // namespace

TaskData load_or_generate_task(const ResultsStore& store, const SyntheticTaskSpec& spec, const LogFn& log) {
    const std::string key = sha256_hex(to_json(spec).dump()).substr(0, 16);
    const fs::path dir = store.dataset_dir(key);
    auto lock = store.lock("dataset-" + key);
    if (fs::exists(dir / "manifest.json")) {
        return load_task(dir);
    }
    say(log, "generating task data " + key);
    TaskData data = generate_task(spec);
    const fs::path tmp = dir.string() + ".tmp";
    fs::remove_all(tmp);
    save_task(data, spec, tmp);
    fs::remove_all(dir);
    fs::rename(tmp, dir);
    return data;
}

std::string teacher_key(const RunConfig& c) {
    const auto& t = c.task;
    const Json j{{"task",
                  {{"kind", std::string(to_string(t.kind))},
                   {"image_size", t.image_size},
                   {"channels", t.channels},
                   {"pretrain_classes", t.pretrain_classes},
                   {"noise", t.noise},
                   {"n_pretrain", t.n_pretrain},
                   {"n_pretrain_test", t.n_pretrain_test},
                   {"seed", t.seed}}},
                 {"teacher", to_json(c.teacher)},
                 {"pretrain",
                  {{"max_epochs", c.pretrain.max_epochs},
                   {"batch_size", c.pretrain.batch_size},
                   {"learning_rate", c.pretrain.learning_rate},
                   {"threshold", c.pretrain.threshold.value_or(default_pretrain_threshold(t.kind))},
                   {"seed", c.pretrain.seed}}}};
    return sha256_hex(j.dump()).substr(0, 16);
}

TeacherHandle load_or_pretrain_teacher(const ResultsStore& store, const RunConfig& config, const TaskData& data,
                                       const LogFn& log) {
    TeacherHandle handle;
    handle.key = teacher_key(config);
    handle.model = build_model(config.teacher, derive_seed(config.pretrain.seed, kTeacherInitTag));
    const fs::path path = store.teacher_path(handle.key);
    auto lock = store.lock("teacher-" + handle.key);
    if (fs::exists(path)) {
        const Checkpoint ck = read_checkpoint(path);
        load_parameters(ck, "teacher", handle.model.parameters());
        const Json report = Json::parse(ck.texts.at("pretrain"));
        handle.report.heldout_metric = report.at("heldout_metric");
        handle.report.epochs_run = report.at("epochs_run");
        handle.report.epoch_metrics = report.at("epoch_metrics").get<std::vector<double>>();
        handle.cached = true;
        return handle;
    }
    PretrainOptions options;
    options.max_epochs = config.pretrain.max_epochs;
    options.batch_size = config.pretrain.batch_size;
    options.learning_rate = config.pretrain.learning_rate;
    options.seed = derive_seed(config.pretrain.seed, kTeacherOrderTag);
    options.threshold = config.pretrain.threshold;
    options.on_epoch = [&](std::size_t epoch, double metric) {
        say(log, "pretrain epoch " + std::to_string(epoch) + ": held-out " + number(metric));
    };
    say(log, "pretraining teacher " + handle.key);
    handle.report =
        pretrain_teacher(handle.model, data.pretrain_train, data.pretrain_test, config.task.kind, options);
    Checkpoint ck;
    store_parameters(ck, "teacher", handle.model.parameters());
    ck.texts["pretrain"] = Json{{"heldout_metric", handle.report.heldout_metric},
                                {"epochs_run", handle.report.epochs_run},
                                {"epoch_metrics", handle.report.epoch_metrics}}
                               .dump();
    ck.texts["teacher"] = to_json(config.teacher).dump();
    write_checkpoint(path, ck);
    return handle;
}

Json to_json(const RunResult& r) {
    Json diagnoses = Json::array();
    for (const auto& d : r.diagnoses) {
        diagnoses.push_back(Json{{"fraction", d.fraction}, {"epoch", d.epoch}, {"diagnosis", to_json(d.diagnosis)}});
    }
    Json history = Json::array();
    for (const auto& e : r.history) {
        history.push_back(to_json(e));
    }
    return Json{{"schema_version", kSchemaVersion},
                {"run_id", r.run_id},
                {"config", to_json(r.config)},
                {"initial_metric", r.initial_metric},
                {"final_metric", r.final_metric},
                {"best_metric", r.best_metric},
                {"history", history},
                {"diagnoses", diagnoses},
                {"similarity", r.similarity ? to_json(*r.similarity) : Json(nullptr)},
                {"convergence", to_json(r.convergence)},
                {"teacher_pretrain_metric", r.teacher_pretrain_metric},
                {"max_identity_residual", r.max_identity_residual},
                {"teacher_unchanged", r.teacher_unchanged},
                {"steps", r.steps},
                {"seconds", r.seconds},
                {"ms_per_step", r.ms_per_step},
                {"checkpoint", r.checkpoint.string()}};
}

RunResult run_result_from_json(const Json& j) {
    RunResult r;
    r.run_id = j.at("run_id");
    r.config = run_config_from_json(j.at("config"));
    r.initial_metric = j.at("initial_metric");
    r.final_metric = j.at("final_metric");
    r.best_metric = j.at("best_metric");
    for (const auto& e : j.at("history")) {
        r.history.push_back(epoch_record_from_json(e));
    }
    for (const auto& d : j.at("diagnoses")) {
        r.diagnoses.push_back(DiagnosisRecord{d.at("fraction"), d.at("epoch"), diagnosis_from_json(d.at("diagnosis"))});
    }
    if (!j.at("similarity").is_null()) {
        r.similarity = similarity_from_json(j.at("similarity"));
    }
    r.convergence = convergence_from_json(j.at("convergence"));
    r.teacher_pretrain_metric = j.at("teacher_pretrain_metric");
    r.max_identity_residual = j.at("max_identity_residual");
    r.teacher_unchanged = j.at("teacher_unchanged");
    r.steps = j.at("steps");
    r.seconds = j.at("seconds");
    r.ms_per_step = j.at("ms_per_step");
    r.checkpoint = j.at("checkpoint").get<std::string>();
    return r;
}

std::vector<std::pair<double, std::size_t>> diagnosis_schedule(std::size_t epochs) {
    std::vector<std::pair<double, std::size_t>> out;
    if (epochs == 0) {
        return out;
    }
    for (double f : {0.25, 0.5, 0.75}) {
        const auto e = static_cast<std::size_t>(std::llround(f * static_cast<double>(epochs)));
        out.emplace_back(f, std::clamp<std::size_t>(e, 1, epochs));
    }
    return out;
}

std::vector<std::size_t> diagnosis_batch(const TaskData& data) {
    return iota_indices(0, std::min(kDiagnosisBatch, data.train.size()));
}

RunResult load_result(const ResultsStore& store, const std::string& id) {
    const fs::path path = store.result_path(id);
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::not_found, "no result for run id " + id);
    }
    RunResult r = run_result_from_json(Json::parse(in));
    r.cached = true;
    return r;
}

RunResult run(const RunConfig& config, const RunOptions& options) {
    validate(config);
    const ResultsStore store = options.store ? *options.store : ResultsStore::from_environment();
    const LogFn& log = options.log;
    const std::string id = run_id(config);
    auto lock = store.lock("run-" + id);
    if (!options.force && store.has_result(id)) {
        say(log, "run " + id + " cached");
        return load_result(store, id);
    }
    fs::remove_all(store.run_dir(id));
    fs::create_directories(store.run_dir(id));
    EventLog events(store.events_path(id), Json{{"run_id", id}, {"config", to_json(config)}});

    RunResult result;
    result.run_id = id;
    result.config = config;

    const TaskData data = load_or_generate_task(store, config.task, log);
    std::optional<TeacherHandle> teacher;
    std::vector<std::vector<double>> teacher_before;
    if (uses_teacher(config.method)) {
        teacher = load_or_pretrain_teacher(store, config, data, log);
        result.teacher_pretrain_metric = teacher->report.heldout_metric;
        events.append("pretrain", Json{{"teacher_key", teacher->key},
                                       {"cached", teacher->cached},
                                       {"heldout_metric", teacher->report.heldout_metric},
                                       {"epochs_run", teacher->report.epochs_run}});
        teacher_before = snapshot(teacher->model.parameters());
    }

    Session session(config, data, teacher ? &teacher->model : nullptr);
    const auto schedule = diagnosis_schedule(config.epochs);
    const auto diag_idx = diagnosis_batch(data);
    const Tensor diag_images = batch_images(data.train, diag_idx);
    const Target diag_target = make_target(data.train, diag_idx, config.task.kind);

    TrainHooks hooks;
    std::size_t step_index = 0;
    hooks.on_step = [&](const LossReport& r) {
        result.max_identity_residual = std::max(result.max_identity_residual, identity_residual(r));
        Json body = to_json(r);
        body["step"] = step_index++;
        events.append("step", std::move(body));
    };
    hooks.on_epoch_end = [&](Session& s, std::size_t done) {
        for (const auto& [fraction, epoch] : schedule) {
            if (!config.diagnose || epoch != done) {
                continue;
            }
            try {
                const auto d = gradient_diagnosis(s.state(schedule_weights(done, config.epochs)), diag_images,
                                                  diag_target);
                result.diagnoses.push_back(DiagnosisRecord{fraction, done, d});
                events.append("diagnosis", Json{{"fraction", fraction}, {"epoch", done}, {"diagnosis", to_json(d)}});
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::zero_vector) {
                    throw;
                }
                events.append("diagnosis_error", Json{{"fraction", fraction}, {"epoch", done}, {"error", e.what()}});
            }
        }
    };
    auto on_failure = [&](const TrainOutcome& partial) {
        Json history = Json::array();
        for (const auto& e : partial.history) {
            history.push_back(to_json(e));
        }
        events.append("failure", Json{{"history", history}, {"steps", partial.steps.size()}});
    };

    say(log, "run " + id + ": " + std::string(to_string(config.method)) + " seed " + std::to_string(config.seed));
    TrainOutcome outcome = train(session, hooks, on_failure);
    for (const auto& e : outcome.history) {
        events.append("epoch", to_json(e));
    }

    result.initial_metric = outcome.initial_metric;
    result.final_metric = outcome.final_metric;
    result.best_metric = outcome.final_metric;
    for (const auto& e : outcome.history) {
        result.best_metric = std::max(result.best_metric, e.test_metric);
    }
    result.history = outcome.history;
    result.convergence = summarize(outcome.history);
    result.steps = outcome.steps.size();
    result.seconds = outcome.seconds;
    result.ms_per_step = outcome.ms_per_step;
    if (teacher) {
        result.teacher_unchanged = snapshot(teacher->model.parameters()) == teacher_before;
        auto [t_feats, s_feats] = session.similarity_features(kSimilaritySamples);
        result.similarity = stage_similarity(t_feats, s_feats);
        events.append("similarity", to_json(*result.similarity));
    }

    Checkpoint ck;
    store_parameters(ck, "trainable", session.trainable_parameters());
    ck.texts["config"] = canonical_config(config);
    result.checkpoint = store.checkpoint_path(id);
    write_checkpoint(result.checkpoint, ck);

    events.append("result", Json{{"final_metric", result.final_metric}, {"best_metric", result.best_metric}});
    write_text_atomic(store.result_path(id), to_json(result).dump(2));
    return result;
}

RestoredRun restore_run(const ResultsStore& store, const std::string& id, const LogFn& log) {
    RestoredRun r;
    r.config = std::make_unique<RunConfig>(load_result(store, id).config);
    r.data = std::make_unique<TaskData>(load_or_generate_task(store, r.config->task, log));
    if (uses_teacher(r.config->method)) {
        r.teacher = std::make_unique<TeacherHandle>(load_or_pretrain_teacher(store, *r.config, *r.data, log));
    }
    r.session = std::make_unique<Session>(*r.config, *r.data, r.teacher ? &r.teacher->model : nullptr);
    const Checkpoint ck = read_checkpoint(store.checkpoint_path(id));
    load_parameters(ck, "trainable", r.session->trainable_parameters());
    return r;
}

DiagnoseReport diagnose_run(const ResultsStore& store, const std::string& id, const LogFn& log) {
    RestoredRun r = restore_run(store, id, log);
    const auto idx = diagnosis_batch(*r.data);
    const std::size_t e = r.config->epochs;
    DiagnoseReport out;
    out.diagnosis = gradient_diagnosis(r.session->state(schedule_weights(e, std::max<std::size_t>(e, 1))),
                                       batch_images(r.data->train, idx),
                                       make_target(r.data->train, idx, r.config->task.kind));
    if (r.teacher) {
        auto [t_feats, s_feats] = r.session->similarity_features(kSimilaritySamples);
        out.similarity = stage_similarity(t_feats, s_feats);
    }
    auto lock = store.lock("run-" + id);
    std::ofstream events(store.events_path(id), std::ios::app);
    Json record{{"schema_version", kSchemaVersion},
                {"type", "diagnosis"},
                {"fraction", 1.0},
                {"epoch", e},
                {"diagnosis", to_json(out.diagnosis)}};
    events << record.dump() << '\n';
    return out;
}

RunResult baseline_feature_mimic(RunConfig config, const RunOptions& options) {
    config.method = Method::feature_mimic;
    return run(config, options);
}

std::vector<ArmSpec> suite_arms(std::string_view suite, const RunConfig& base) {
    std::vector<ArmSpec> arms;
    RunConfig teacher_base = base;
    if (!uses_teacher(teacher_base.method)) {
        teacher_base.method = Method::drd;
    }
    auto arm = [&](std::string name, RunConfig c) { arms.push_back(ArmSpec{std::move(name), std::move(c)}); };
    if (suite == "components") {
        RunConfig c = base;
        c.pairing = PairingStrategy::identity;
        c.projector = ProjectorKind::conv3_default;
        c.projector_hidden = 0;
        c.teacher_boundaries.reset();
        for (auto [name, method] : {std::pair{"vanilla", Method::vanilla}, std::pair{"direct_reprog+kd", Method::direct_reprog},
                                    std::pair{"co_reprog+kd", Method::drd_no_cka}, std::pair{"drd", Method::drd}}) {
            RunConfig m = method == Method::vanilla ? c : teacher_base;
            m.method = method;
            arm(name, m);
        }
    } else if (suite == "depth") {
        for (std::size_t n : {1, 2, 4}) {
            RunConfig c = teacher_base;
            c.n_stages = n;
            c.teacher_boundaries.reset();
            c.student_boundaries.reset();
            arm("N=" + std::to_string(n), c);
        }
    } else if (suite == "projector") {
        for (auto kind : {ProjectorKind::conv3_default, ProjectorKind::linear, ProjectorKind::resize_1x1,
                          ProjectorKind::conv2, ProjectorKind::wide_conv3}) {
            RunConfig c = teacher_base;
            c.projector = kind;
            c.projector_hidden = 0;
            arm(std::string(to_string(kind)), c);
        }
    } else if (suite == "boundary") {
        const auto uniform = partition(teacher_base.teacher.depth, teacher_base.n_stages).boundaries;
        auto label = [](const std::vector<std::size_t>& b) {
            std::string s;
            for (std::size_t i = 0; i < b.size(); ++i) {
                s += (i ? "-" : "") + std::to_string(b[i]);
            }
            return s;
        };
        RunConfig c = teacher_base;
        c.teacher_boundaries = uniform;
        arm("uniform " + label(uniform), c);
        // Inner boundaries moved one block earlier / later where still valid.
        for (int shift : {-1, 1}) {
            auto b = uniform;
            for (std::size_t i = 0; i + 1 < b.size(); ++i) {
                b[i] = static_cast<std::size_t>(static_cast<long>(b[i]) + shift);
            }
            bool ok = b.size() > 1;
            for (std::size_t i = 0; ok && i + 1 < b.size(); ++i) {
                ok = static_cast<long>(uniform[i]) + shift >= 0 && b[i] < b[i + 1] && (i == 0 || b[i - 1] < b[i]);
            }
            if (ok) {
                c.teacher_boundaries = b;
                arm((shift < 0 ? "early " : "late ") + label(b), c);
            }
        }
    } else if (suite == "pairing") {
        for (auto p : {PairingStrategy::identity, PairingStrategy::reverse, PairingStrategy::shift_right}) {
            RunConfig c = teacher_base;
            c.pairing = p;
            arm(std::string(to_string(p)), c);
        }
    } else {
        fail(ErrorKind::invalid_argument, "unknown ablation suite '" + std::string(suite) + "'");
    }
    for (const auto& a : arms) {
        validate(a.config);
    }
    return arms;
}

AblationTable ablation_suite(std::string_view suite, const RunConfig& base, std::span<const std::uint64_t> seeds,
                             const RunOptions& options) {
    require(!seeds.empty(), "ablation_suite: no seeds");
    const auto arms = suite_arms(suite, base);
    AblationTable table;
    table.suite = std::string(suite);
    table.baseline = arms.front().name;
    table.seeds.assign(seeds.begin(), seeds.end());
    for (const auto& a : arms) {
        ArmSummary s;
        s.name = a.name;
        for (auto seed : seeds) {
            RunConfig c = a.config;
            c.seed = seed;
            const RunResult r = run(c, options);
            s.run_ids.push_back(r.run_id);
            s.metrics.push_back(r.final_metric);
            s.diverged = s.diverged || r.convergence.diverged;
        }
        const double n = static_cast<double>(s.metrics.size());
        s.mean = std::accumulate(s.metrics.begin(), s.metrics.end(), 0.0) / n;
        double ss = 0.0;
        for (double m : s.metrics) {
            ss += (m - s.mean) * (m - s.mean);
        }
        s.std = s.metrics.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        table.arms.push_back(std::move(s));
    }
    const auto& baseline = table.arms.front().metrics;
    for (std::size_t i = 1; i < table.arms.size() && seeds.size() >= 2; ++i) {
        try {
            const auto t = paired_t_test(table.arms[i].metrics, baseline);
            table.arms[i].p_value = t.p;
            table.arms[i].t_statistic = t.t;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::degenerate_test) {
                throw;
            }
        }
    }
    return table;
}

Json to_json(const AblationTable& table) {
    Json arms = Json::array();
    for (const auto& a : table.arms) {
        arms.push_back(Json{{"name", a.name},
                            {"run_ids", a.run_ids},
                            {"metrics", a.metrics},
                            {"mean", a.mean},
                            {"std", a.std},
                            {"p_value", optional_number(a.p_value)},
                            {"t", optional_number(a.t_statistic)},
                            {"diverged", a.diverged}});
    }
    return Json{{"schema_version", kSchemaVersion},
                {"suite", table.suite},
                {"baseline", table.baseline},
                {"seeds", table.seeds},
                {"arms", arms}};
}

std::string format_table(const AblationTable& table) {
    std::ostringstream out;
    out << "suite " << table.suite << ", baseline " << table.baseline << ", " << table.seeds.size() << " seeds\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %8s %8s %10s\n", "arm", "mean", "std", "p");
    out << line;
    for (const auto& a : table.arms) {
        std::string p = a.p_value ? number(std::round(*a.p_value * 1e4) / 1e4) : "-";
        std::snprintf(line, sizeof line, "%-24s %8.1f %8.1f %10s%s\n", a.name.c_str(), a.mean, a.std, p.c_str(),
                      a.diverged ? "  diverged" : "");
        out << line;
    }
    return out.str();
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "csv") {
        return ReportFormat::csv;
    }
    if (name == "jsonl") {
        return ReportFormat::jsonl;
    }
    if (name == "plotdata") {
        return ReportFormat::plotdata;
    }
    fail(ErrorKind::invalid_argument, "unknown report format '" + std::string(name) + "'");
}

std::vector<std::string> csv_columns() {
    return {"run_id",         "method",       "task",           "seed",          "n_stages",
            "pairing",        "projector",    "epochs",         "initial_metric", "final_metric",
            "best_metric",    "decrease_fraction", "diverged",  "seconds",       "ms_per_step"};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::not_found, "cannot open " + path.string());
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            row.push_back(cell);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<fs::path> report(const ResultsStore& store, std::span<const std::string> run_ids, ReportFormat format,
                             const fs::path& out_dir) {
    std::vector<RunResult> results;
    for (const auto& id : run_ids) {
        results.push_back(load_result(store, id));
    }
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    if (format == ReportFormat::csv) {
        const fs::path path = out_dir / "runs.csv";
        std::ofstream out(path);
        const auto cols = csv_columns();
        for (std::size_t i = 0; i < cols.size(); ++i) {
            out << (i ? "," : "") << cols[i];
        }
        out << '\n';
        for (const auto& r : results) {
            const auto& c = r.config;
            out << r.run_id << ',' << to_string(c.method) << ',' << to_string(c.task.kind) << ',' << c.seed << ','
                << c.n_stages << ',' << to_string(c.pairing) << ',' << to_string(c.projector) << ',' << c.epochs << ','
                << number(r.initial_metric) << ',' << number(r.final_metric) << ',' << number(r.best_metric) << ','
                << number(r.convergence.decrease_fraction) << ',' << (r.convergence.diverged ? 1 : 0) << ','
                << number(r.seconds) << ',' << number(r.ms_per_step) << '\n';
        }
        written.push_back(path);
    } else if (format == ReportFormat::jsonl) {
        const fs::path path = out_dir / "runs.jsonl";
        std::ofstream out(path);
        out << Json{{"schema_version", kSchemaVersion}, {"type", "header"}, {"runs", run_ids}}.dump() << '\n';
        for (const auto& r : results) {
            Json record = to_json(r);
            record["type"] = "run";
            out << record.dump() << '\n';
        }
        written.push_back(path);
    } else {
        for (const auto& r : results) {
            const fs::path curves = out_dir / (r.run_id + ".curves.csv");
            std::ofstream out(curves);
            out << "epoch,l_train,l_sup,l_hybrid,l_kd,l_cka,l_mimic,alpha,beta,test_metric\n";
            for (const auto& e : r.history) {
                const auto& m = e.mean;
                out << e.epoch << ',' << number(m.l_train) << ',' << number(m.l_sup) << ',' << number(m.l_hybrid)
                    << ',' << number(m.l_kd) << ',' << number(m.l_cka) << ',' << number(m.l_mimic) << ','
                    << number(m.alpha) << ',' << number(m.beta) << ',' << number(e.test_metric) << '\n';
            }
            written.push_back(curves);
            if (r.similarity) {
                const fs::path grid = out_dir / (r.run_id + ".similarity.csv");
                std::ofstream g(grid);
                for (std::size_t i = 0; i < r.similarity->rows; ++i) {
                    for (std::size_t j = 0; j < r.similarity->cols; ++j) {
                        g << (j ? "," : "") << number(r.similarity->at(i, j));
                    }
                    g << '\n';
                }
                written.push_back(grid);
            }
        }
    }
    return written;
}

}  // namespace drd
