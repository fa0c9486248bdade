#include "drd/serialization.hpp"

#include <algorithm>

#include "drd/error.hpp"

namespace drd {

namespace {

Json dims_to_json(const FeatureDims& d) { return Json::array({d.channels, d.height, d.width}); }

FeatureDims dims_from_json(const Json& j, const char* where) {
    if (!j.is_array() || j.size() != 3) {
        fail(ErrorKind::validation, std::string(where) + " must be [channels, height, width]");
    }
    return FeatureDims{j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

}  // namespace

void require_known_keys(const Json& object, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!object.is_object()) {
        fail(ErrorKind::validation, where + " must be an object");
    }
    for (const auto& [key, value] : object.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known) {
            fail(ErrorKind::validation, "unknown key '" + key + "' in " + where);
        }
    }
}

Json to_json(const SyntheticTaskSpec& spec) {
    return Json{{"kind", std::string(to_string(spec.kind))},
                {"image_size", spec.image_size},
                {"channels", spec.channels},
                {"n_classes", spec.n_classes},
                {"pretrain_classes", spec.pretrain_classes},
                {"downstream_classes", resolved_downstream_classes(spec)},
                {"style_shift", spec.style_shift},
                {"noise", spec.noise},
                {"n_train", spec.n_train},
                {"n_test", spec.n_test},
                {"n_pretrain", spec.n_pretrain},
                {"n_pretrain_test", spec.n_pretrain_test},
                {"seed", spec.seed}};
}

SyntheticTaskSpec task_spec_from_json(const Json& j) {
    require_known_keys(j,
                       {"kind", "image_size", "channels", "n_classes", "pretrain_classes", "downstream_classes",
                        "style_shift", "noise", "n_train", "n_test", "n_pretrain", "n_pretrain_test", "seed"},
                       "task");
    SyntheticTaskSpec spec;
    spec.kind = parse_task_kind(get_or<std::string>(j, "kind", "classification"));
    if (spec.kind == TaskKind::segmentation) {
        spec.image_size = 48;
    }
    spec.image_size = get_or(j, "image_size", spec.image_size);
    spec.channels = get_or(j, "channels", spec.channels);
    spec.n_classes = get_or(j, "n_classes", spec.n_classes);
    spec.pretrain_classes = get_or(j, "pretrain_classes", spec.pretrain_classes);
    spec.downstream_classes = get_or(j, "downstream_classes", spec.downstream_classes);
    spec.style_shift = get_or(j, "style_shift", spec.style_shift);
    spec.noise = get_or(j, "noise", spec.noise);
    spec.n_train = get_or(j, "n_train", spec.n_train);
    spec.n_test = get_or(j, "n_test", spec.n_test);
    spec.n_pretrain = get_or(j, "n_pretrain", spec.n_pretrain);
    spec.n_pretrain_test = get_or(j, "n_pretrain_test", spec.n_pretrain_test);
    spec.seed = get_or(j, "seed", spec.seed);
    validate(spec);
    return spec;
}

Json to_json(const ModelSpec& spec) {
    Json j{{"family", std::string(to_string(spec.family))},
           {"depth", spec.depth},
           {"width", spec.width},
           {"head", std::string(to_string(spec.head))},
           {"outputs", spec.outputs},
           {"in_channels", spec.in_channels},
           {"image_size", spec.image_size}};
    if (spec.family == Family::patch_flat) {
        j["patch"] = spec.patch;
    } else {
        j["strides"] = spec.strides;
    }
    return j;
}

ModelSpec model_spec_from_json(const Json& j) {
    require_known_keys(j, {"family", "depth", "width", "head", "outputs", "in_channels", "image_size", "patch", "strides"},
                       "model");
    ModelSpec spec;
    spec.family = parse_family(get_or<std::string>(j, "family", "conv_hierarchical"));
    spec.depth = get_or(j, "depth", spec.depth);
    spec.width = get_or(j, "width", spec.width);
    spec.head = parse_head(get_or<std::string>(j, "head", "classifier"));
    spec.outputs = get_or(j, "outputs", spec.outputs);
    spec.in_channels = get_or(j, "in_channels", spec.in_channels);
    spec.image_size = get_or(j, "image_size", spec.image_size);
    spec.patch = get_or(j, "patch", spec.patch);
    spec.strides = get_or(j, "strides", spec.strides);
    validate(spec);
    return spec;
}

Json to_json(const StagePlan& plan) {
    return Json{{"n_stages", plan.n_stages}, {"boundaries", plan.boundaries}, {"pairing", plan.pairing}};
}

StagePlan stage_plan_from_json(const Json& j) {
    require_known_keys(j, {"n_stages", "boundaries", "pairing"}, "stage plan");
    StagePlan plan;
    plan.n_stages = get_or<std::size_t>(j, "n_stages", 0);
    plan.boundaries = get_or(j, "boundaries", std::vector<std::size_t>{});
    plan.pairing = get_or(j, "pairing", std::vector<std::size_t>{});
    return plan;
}

Json to_json(const ProjectorSpec& spec) {
    return Json{{"kind", std::string(to_string(spec.kind))},
                {"in", dims_to_json(spec.in)},
                {"out", dims_to_json(spec.out)},
                {"hidden_width", spec.hidden_width},
                {"bias", spec.bias}};
}

ProjectorSpec projector_spec_from_json(const Json& j) {
    require_known_keys(j, {"kind", "in", "out", "hidden_width", "bias"}, "projector spec");
    ProjectorSpec spec;
    spec.kind = parse_projector_kind(get_or<std::string>(j, "kind", "conv3_default"));
    spec.in = dims_from_json(j.at("in"), "projector in");
    spec.out = dims_from_json(j.at("out"), "projector out");
    spec.hidden_width = get_or(j, "hidden_width", spec.hidden_width);
    spec.bias = get_or(j, "bias", spec.bias);
    validate(spec);
    return spec;
}

}  // namespace drd
