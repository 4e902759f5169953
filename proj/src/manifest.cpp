#include "fastturn/data/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "fastturn/common.hpp"

namespace fastturn::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

void check_alignments(const std::vector<int>& tokens, const std::vector<std::pair<int, int>>& alignments,
                      long frame_limit, const std::string& context) {
    if (tokens.size() != alignments.size())
        throw ConfigError(context + ": tokens/alignments length mismatch");
    long prev_end = 0;
    for (std::size_t i = 0; i < alignments.size(); ++i) {
        const auto [start, end] = alignments[i];
        if (start < 0 || end <= start)
            throw ConfigError(context + ": alignment span " + std::to_string(i) + " is empty or negative");
        if (start < prev_end)
            throw ConfigError(context + ": alignment span " + std::to_string(i) + " overlaps or goes backwards");
        if (frame_limit >= 0 && end > frame_limit)
            throw ConfigError(context + ": alignment out of feature range (end " + std::to_string(end) +
                              " > " + std::to_string(frame_limit) + " frames)");
        prev_end = end;
    }
}

namespace {

SampleDesc parse_line(const json& j, const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": not a JSON object");
    auto need = [&](const char* key) -> const json& {
        if (!j.contains(key)) throw ConfigError(context + ": missing required field \"" + key + "\"");
        return j.at(key);
    };
    SampleDesc d;
    const json& jid = need("id");
    if (!jid.is_string()) throw ConfigError(context + ": \"id\" must be a string");
    d.id = jid.get<std::string>();

    const json& jstate = need("turn_state");
    if (!jstate.is_string()) throw ConfigError(context + ": \"turn_state\" must be a string");
    try {
        d.turn_state = turn_state_from_string(jstate.get<std::string>());
    } catch (const ConfigError& e) {
        throw ConfigError(context + ": " + e.what());
    }

    const json& jtok = need("tokens");
    if (!jtok.is_array()) throw ConfigError(context + ": \"tokens\" must be an array");
    for (const auto& t : jtok) {
        if (!t.is_number_integer()) throw ConfigError(context + ": token ids must be integers");
        d.tokens.push_back(t.get<int>());
    }

    const json& jal = need("alignments");
    if (!jal.is_array()) throw ConfigError(context + ": \"alignments\" must be an array");
    for (const auto& a : jal) {
        if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() || !a[1].is_number_integer())
            throw ConfigError(context + ": alignments must be [start, end] integer pairs");
        d.alignments.emplace_back(a[0].get<int>(), a[1].get<int>());
    }

    const json& jfeat = need("features");
    if (!jfeat.is_string()) throw ConfigError(context + ": \"features\" must be a string path");
    d.features_rel = jfeat.get<std::string>();

    const json& jsrc = need("source");
    if (!jsrc.is_string()) throw ConfigError(context + ": \"source\" must be a string");
    d.source = jsrc.get<std::string>();
    if (d.source != "real" && d.source != "synthesized")
        throw ConfigError(context + ": \"source\" must be \"real\" or \"synthesized\"");

    if (j.contains("num_frames") && j["num_frames"].is_number_integer())
        d.num_frames_hint = j["num_frames"].get<long>();
    if (j.contains("frame_period_ms") && j["frame_period_ms"].is_number())
        d.frame_period_ms_hint = j["frame_period_ms"].get<double>();

    // bounds against features are checked when features are read; structural
    // monotonicity is checked here
    check_alignments(d.tokens, d.alignments, d.num_frames_hint, context);
    return d;
}

} // namespace

std::vector<SampleDesc> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::vector<SampleDesc> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string context = path + ": line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ConfigError(context + ": JSON parse error: " + e.what());
        }
        out.push_back(parse_line(j, context));
    }
    return out;
}

std::vector<Sample> load_corpus(const std::string& manifest_path) {
    const auto descs = load_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<Sample> out;
    out.reserve(descs.size());
    for (const auto& d : descs) {
        Sample s;
        s.id = d.id;
        s.turn_state = d.turn_state;
        s.tokens = d.tokens;
        s.alignments = d.alignments;
        s.source = d.source;
        s.features = read_features((base / d.features_rel).string());
        check_alignments(s.tokens, s.alignments, s.features.num_frames, manifest_path + ": sample " + d.id);
        out.push_back(std::move(s));
    }
    return out;
}

StateStats summarize(const std::vector<SampleDesc>& descs) {
    StateStats st;
    for (const auto& d : descs) {
        const int k = static_cast<int>(d.turn_state);
        st.count[static_cast<std::size_t>(k)] += 1;
        if (d.num_frames_hint >= 0) {
            const double period = d.frame_period_ms_hint > 0 ? d.frame_period_ms_hint : 10.0;
            st.hours[static_cast<std::size_t>(k)] +=
                static_cast<double>(d.num_frames_hint) * period / 3.6e6;
        }
    }
    return st;
}

std::string write_corpus(const std::vector<Sample>& samples, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "features");
    const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + manifest_path);
    for (const auto& s : samples) {
        const std::string rel = "features/" + s.id + ".ftfe";
        write_features((fs::path(out_dir) / rel).string(), s.features);
        json j;
        j["id"] = s.id;
        j["turn_state"] = to_string(s.turn_state);
        j["tokens"] = s.tokens;
        json al = json::array();
        for (const auto& [a, b] : s.alignments) al.push_back({a, b});
        j["alignments"] = al;
        j["features"] = rel;
        j["source"] = s.source;
        j["num_frames"] = s.features.num_frames;
        j["frame_period_ms"] = s.features.frame_period_ms;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + manifest_path);
    return manifest_path;
}

} // namespace fastturn::data
