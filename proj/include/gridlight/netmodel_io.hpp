#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gridlight/netmodel.hpp"

namespace gridlight {

class NetworkParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline nlohmann::json network_to_json(const TrafficNetwork& net) {
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : net.links) {
        links.push_back({{"from", l.from},
                         {"to", l.to},
                         {"lanes", l.lanes},
                         {"length_m", l.length_m},
                         {"speed_limit_mps", l.speed_mps}});
    }
    nlohmann::json phases = nlohmann::json::array();
    if (!net.intersections.empty()) {
        for (const auto& p : net.intersections[0].phase_table) phases.push_back(p.movements);
    }
    return nlohmann::json{{"rows", net.rows}, {"cols", net.cols}, {"links", std::move(links)},
                          {"phase_table", std::move(phases)}};
}

inline TrafficNetwork network_from_json(const nlohmann::json& j) {
    for (const char* key : {"rows", "cols", "links", "phase_table"}) {
        if (!j.contains(key)) throw NetworkParseError(std::string("network file: missing key '") + key + "'");
    }
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();

    std::vector<Phase> table;
    int pid = 0;
    for (const auto& movements : j.at("phase_table")) {
        Phase p;
        p.id = pid++;
        for (const auto& m : movements) p.movements.push_back(m.get<int>());
        table.push_back(std::move(p));
    }

    TrafficNetwork net = build_grid_network(rows, cols, GridLinkConfig{}, table);

    const auto& jlinks = j.at("links");
    if (jlinks.size() != net.links.size()) {
        throw NetworkParseError("network file: expected " + std::to_string(net.links.size()) + " links, got " +
                                std::to_string(jlinks.size()));
    }
    for (const auto& jl : jlinks) {
        for (const char* key : {"from", "to", "lanes", "length_m", "speed_limit_mps"}) {
            if (!jl.contains(key)) throw NetworkParseError(std::string("network file: link missing field '") + key + "'");
        }
        const NodeId from = jl.at("from").get<NodeId>();
        const NodeId to = jl.at("to").get<NodeId>();
        RoadLink* found = nullptr;
        for (auto& l : net.links) {
            if (l.from == from && l.to == to) {
                found = &l;
                break;
            }
        }
        if (!found) {
            throw NetworkParseError("network file: link " + std::to_string(from) + "->" + std::to_string(to) +
                                    " does not exist in a " + std::to_string(rows) + "x" + std::to_string(cols) +
                                    " grid");
        }
        found->lanes = jl.at("lanes").get<int>();
        found->length_m = jl.at("length_m").get<double>();
        found->speed_mps = jl.at("speed_limit_mps").get<double>();
    }
    return net;
}

inline void save_network(const TrafficNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_network: cannot open " + path);
    out << network_to_json(net).dump(2) << "\n";
}

inline TrafficNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NetworkParseError("load_network: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw NetworkParseError("load_network: " + path + ": " + e.what());
    }
    return network_from_json(j);
}

}  // namespace gridlight
