#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "maple/fsm/fsm.hpp"

namespace maple::fsm {

// FSM document, schema version 1. Lossless: import(export(fsm)) == fsm.
nlohmann::json fsm_to_json(const AppFsm& fsm);
AppFsm fsm_from_json(const nlohmann::json& j);

// Graphviz rendering: one node per state labeled with its beacon; verified
// states are drawn double-circled, edges labeled with the action call.
std::string fsm_to_dot(const AppFsm& fsm);

// format is "json" or "dot"; anything else throws UnsupportedFormatError.
std::string export_fsm(const AppFsm& fsm, const std::string& format);

}  // namespace maple::fsm
