#pragma once

#include "json.hpp"
#include "lfo/reacher.hpp"
#include "lfo/taskgen.hpp"

namespace lfo {

using Json = nlohmann::json;

void to_json(Json& j, const EnvConfig& c);
void from_json(const Json& j, EnvConfig& c);

void to_json(Json& j, const Target& t);
void from_json(const Json& j, Target& t);

void to_json(Json& j, const TaskSpec& t);
void from_json(const Json& j, TaskSpec& t);

}  // namespace lfo
