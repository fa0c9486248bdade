#include "drd/config.hpp"

#include "drd/error.hpp"

namespace drd {

Method parse_method(std::string_view name) {
    if (name == "drd") {
        return Method::drd;
    }
    if (name == "drd_no_cka") {
        return Method::drd_no_cka;
    }
    if (name == "direct_reprog") {
        return Method::direct_reprog;
    }
    if (name == "feature_mimic") {
        return Method::feature_mimic;
    }
    if (name == "vanilla") {
        return Method::vanilla;
    }
    fail(ErrorKind::invalid_argument, "unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method method) {
    switch (method) {
        case Method::drd:
            return "drd";
        case Method::drd_no_cka:
            return "drd_no_cka";
        case Method::direct_reprog:
            return "direct_reprog";
        case Method::feature_mimic:
            return "feature_mimic";
        case Method::vanilla:
            return "vanilla";
    }
    return "drd";
}

bool uses_teacher(Method method) { return method != Method::vanilla; }

RunConfig reference_config(TaskKind kind) {
    RunConfig c;
    c.task.kind = kind;
    c.teacher.family = Family::patch_flat;
    c.teacher.depth = 12;
    c.teacher.width = 16;
    c.teacher.patch = 4;
    c.student.family = Family::conv_hierarchical;
    c.student.depth = 4;
    c.student.width = 8;
    if (kind == TaskKind::classification) {
        c.task.image_size = 32;
        c.teacher.head = HeadKind::classifier;
        c.teacher.outputs = c.task.pretrain_classes;
        c.student.head = HeadKind::classifier;
        c.student.outputs = c.task.n_classes;
    } else {
        c.task.image_size = 48;
        c.teacher.head = HeadKind::dense_mask;
        c.teacher.outputs = 2;
        c.student.head = HeadKind::dense_mask;
        c.student.outputs = 2;
        c.student.strides = {2, 2, 1, 1};
        c.batch_size = 8;
        c.task.n_train = 30;
    }
    c.teacher.image_size = c.task.image_size;
    c.student.image_size = c.task.image_size;
    return c;
}

namespace {

void check(bool condition, const std::string& message) {
    if (!condition) {
        fail(ErrorKind::validation, message);
    }
}

void check_model(const ModelSpec& m, const SyntheticTaskSpec& task, std::size_t outputs, const char* role) {
    try {
        validate(m);
    } catch (const Error& e) {
        fail(ErrorKind::validation, std::string(role) + ": " + e.what());
    }
    const HeadKind head = task.kind == TaskKind::classification ? HeadKind::classifier : HeadKind::dense_mask;
    check(m.head == head, std::string(role) + " head must be " + std::string(to_string(head)) + " for " +
                              std::string(to_string(task.kind)));
    check(m.outputs == outputs, std::string(role) + " outputs must be " + std::to_string(outputs));
    check(m.image_size == task.image_size, std::string(role) + " image_size must equal the task image_size");
    check(m.in_channels == task.channels, std::string(role) + " in_channels must equal the task channels");
}

}  // namespace

void validate(const RunConfig& c) {
    try {
        validate(c.task);
    } catch (const Error& e) {
        fail(ErrorKind::validation, std::string("task: ") + e.what());
    }
    const bool cls = c.task.kind == TaskKind::classification;
    check_model(c.teacher, c.task, cls ? c.task.pretrain_classes : 2, "teacher");
    check_model(c.student, c.task, cls ? c.task.n_classes : 2, "student");
    check(c.batch_size >= 2, "batch_size must be at least 2");
    check(c.learning_rate > 0.0, "learning_rate must be positive");
    check(c.weight_decay >= 0.0, "weight_decay must be non-negative");
    check(c.pretrain.batch_size >= 1 && c.pretrain.learning_rate > 0.0, "invalid pretrain settings");
    check(c.n_stages >= 1, "n_stages must be at least 1");
    if (c.method == Method::vanilla) {
        check(c.pairing == PairingStrategy::identity && c.projector == ProjectorKind::conv3_default &&
                  c.projector_hidden == 0 && !c.teacher_boundaries,
              "vanilla runs take no pairing, projector or teacher boundary settings");
    }
    try {
        if (uses_teacher(c.method)) {
            partition(c.teacher.depth, c.n_stages, c.teacher_boundaries);
            partition(c.student.depth, c.n_stages, c.student_boundaries);
        } else if (c.student_boundaries) {
            partition(c.student.depth, c.n_stages, c.student_boundaries);
        }
    } catch (const Error& e) {
        fail(ErrorKind::validation, std::string("stage plan: ") + e.what());
    }
}

}  // namespace drd
