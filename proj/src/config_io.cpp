#include "drd/config_io.hpp"

#include <fstream>

#include "drd/error.hpp"
#include "drd/hashing.hpp"
#include "drd/pretrain.hpp"

namespace drd {

namespace {

Json pretrain_to_json(const PretrainConfig& p, TaskKind kind) {
    return Json{{"max_epochs", p.max_epochs},
                {"batch_size", p.batch_size},
                {"learning_rate", p.learning_rate},
                {"threshold", p.threshold.value_or(default_pretrain_threshold(kind))},
                {"seed", p.seed}};
}

PretrainConfig pretrain_from_json(const Json& j) {
    require_known_keys(j, {"max_epochs", "batch_size", "learning_rate", "threshold", "seed"}, "pretrain");
    PretrainConfig p;
    p.max_epochs = get_or(j, "max_epochs", p.max_epochs);
    p.batch_size = get_or(j, "batch_size", p.batch_size);
    p.learning_rate = get_or(j, "learning_rate", p.learning_rate);
    if (j.contains("threshold") && !j["threshold"].is_null()) {
        p.threshold = get_or(j, "threshold", 0.0);
    }
    p.seed = get_or(j, "seed", p.seed);
    return p;
}

ModelSpec with_explicit_strides(ModelSpec m) {
    if (m.family == Family::conv_hierarchical && m.strides.empty()) {
        m.strides.assign(m.depth, 2);
    }
    return m;
}

// Section `key` of `raw` overlaid on `base`.
Json overlay(const Json& base, const Json& raw, const char* key) {
    Json merged = base;
    if (raw.contains(key)) {
        if (!raw[key].is_object()) {
            fail(ErrorKind::validation, std::string(key) + " must be an object");
        }
        merged.merge_patch(raw[key]);
    }
    return merged;
}

}  // namespace

Json to_json(const RunConfig& c) {
    const bool teacher = uses_teacher(c.method);
    Json j{{"task", to_json(c.task)},
           {"student", to_json(with_explicit_strides(c.student))},
           {"method", std::string(to_string(c.method))},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"seed", c.seed},
           {"diagnose", c.diagnose}};
    if (teacher) {
        j["teacher"] = to_json(with_explicit_strides(c.teacher));
        j["pretrain"] = pretrain_to_json(c.pretrain, c.task.kind);
        j["n_stages"] = c.n_stages;
        j["teacher_boundaries"] = partition(c.teacher.depth, c.n_stages, c.teacher_boundaries).boundaries;
        j["student_boundaries"] = partition(c.student.depth, c.n_stages, c.student_boundaries).boundaries;
        j["pairing"] = std::string(to_string(c.pairing));
        j["projector"] = std::string(to_string(c.projector));
        j["projector_hidden"] = c.projector_hidden;
    }
    return j;
}

RunConfig run_config_from_json(const Json& raw) {
    require_known_keys(raw,
                       {"task", "teacher", "student", "pretrain", "method", "n_stages", "teacher_boundaries",
                        "student_boundaries", "pairing", "projector", "projector_hidden", "epochs", "batch_size",
                        "learning_rate", "weight_decay", "seed", "diagnose"},
                       "run config");
    try {
        TaskKind kind = TaskKind::classification;
        if (raw.contains("task") && raw["task"].is_object() && raw["task"].contains("kind")) {
            kind = parse_task_kind(raw["task"]["kind"].get<std::string>());
        }
        RunConfig c = reference_config(kind);
        c.method = parse_method(get_or<std::string>(raw, "method", std::string(to_string(c.method))));
        if (c.method == Method::vanilla) {
            for (const char* key : {"pairing", "projector", "projector_hidden", "teacher_boundaries"}) {
                if (raw.contains(key)) {
                    fail(ErrorKind::validation, std::string("vanilla runs do not accept '") + key + "'");
                }
            }
        }
        c.task = task_spec_from_json(overlay(to_json(c.task), raw, "task"));
        // Head sizes follow the task unless given explicitly.
        if (kind == TaskKind::classification) {
            c.teacher.outputs = c.task.pretrain_classes;
            c.student.outputs = c.task.n_classes;
        }
        c.teacher.image_size = c.student.image_size = c.task.image_size;
        c.teacher.in_channels = c.student.in_channels = c.task.channels;
        c.teacher = model_spec_from_json(overlay(to_json(c.teacher), raw, "teacher"));
        c.student = model_spec_from_json(overlay(to_json(c.student), raw, "student"));
        if (raw.contains("pretrain")) {
            c.pretrain = pretrain_from_json(overlay(pretrain_to_json(c.pretrain, kind), raw, "pretrain"));
        }
        c.n_stages = get_or(raw, "n_stages", c.n_stages);
        if (raw.contains("teacher_boundaries")) {
            c.teacher_boundaries = raw["teacher_boundaries"].get<std::vector<std::size_t>>();
        }
        if (raw.contains("student_boundaries")) {
            c.student_boundaries = raw["student_boundaries"].get<std::vector<std::size_t>>();
        }
        c.pairing = parse_pairing(get_or<std::string>(raw, "pairing", std::string(to_string(c.pairing))));
        c.projector = parse_projector_kind(get_or<std::string>(raw, "projector", std::string(to_string(c.projector))));
        c.projector_hidden = get_or(raw, "projector_hidden", c.projector_hidden);
        c.epochs = get_or(raw, "epochs", c.epochs);
        c.batch_size = get_or(raw, "batch_size", c.batch_size);
        c.learning_rate = get_or(raw, "learning_rate", c.learning_rate);
        c.weight_decay = get_or(raw, "weight_decay", c.weight_decay);
        c.seed = get_or(raw, "seed", c.seed);
        c.diagnose = get_or(raw, "diagnose", c.diagnose);
        validate(c);
        return c;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("run config: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::validation) {
            throw;
        }
        fail(ErrorKind::validation, std::string("run config: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::not_found, "cannot open config " + path.string());
    }
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

std::string canonical_config(const RunConfig& config) { return to_json(config).dump(); }

std::string run_id(const RunConfig& config) { return sha256_hex(canonical_config(config)).substr(0, 16); }

}  // namespace drd
