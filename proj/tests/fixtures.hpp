#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "stcaog/fusion.hpp"

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline stcaog::StcAog load_stc(const std::string& name) {
    return stcaog::stc_from_json(nlohmann::json::parse(read_text("data/fixtures/" + name + ".stc.json")));
}
