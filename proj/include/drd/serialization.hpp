#pragma once

// JSON mappings for the declarative spec types. Parsing rejects unknown keys
// so that a misspelt config entry fails validation instead of being ignored.

#include <initializer_list>
#include <string>

#include "json.hpp"

#include "drd/data.hpp"
#include "drd/models.hpp"
#include "drd/reprogramming.hpp"
#include "drd/error.hpp"
#include "drd/staging.hpp"

namespace drd {

using Json = nlohmann::json;

// `key` of `j`, or `fallback` when absent or null; type mismatches are
// validation errors.
template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return fallback;
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("field '") + key + "': " + e.what());
    }
}

// Throws validation error when `object` holds a key outside `allowed`.
void require_known_keys(const Json& object, std::initializer_list<const char*> allowed, const std::string& where);

Json to_json(const SyntheticTaskSpec& spec);
SyntheticTaskSpec task_spec_from_json(const Json& j);

Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j);

Json to_json(const StagePlan& plan);
StagePlan stage_plan_from_json(const Json& j);

Json to_json(const ProjectorSpec& spec);
ProjectorSpec projector_spec_from_json(const Json& j);

}  // namespace drd
