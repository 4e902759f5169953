#include "fastturn/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "fastturn/common.hpp"

namespace fastturn {

using json = nlohmann::json;

void DuplexConfig::validate() const {
    if (k_consecutive < 1) throw ConfigError("duplex: k_consecutive must be >= 1");
    if (tau <= 0.0) throw ConfigError("duplex: tau must be positive");
}

namespace {

// Tracks which keys were consumed; unknown keys are config errors.
class Strict {
public:
    Strict(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <typename T>
    void opt(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }

    void opt_range(const char* key, int& lo, int& hi) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& a = j_.at(key);
        if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() || !a[1].is_number_integer())
            throw ConfigError(where_ + "." + key + ": expected [min, max] integers");
        lo = a[0].get<int>();
        hi = a[1].get<int>();
    }

    const json* obj(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return nullptr;
        if (!j_.at(key).is_object()) throw ConfigError(where_ + "." + key + ": expected an object");
        return &j_.at(key);
    }

    void finish() {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(where_ + ": unknown key \"" + it.key() + "\"");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void parse_stage(const json* j, const std::string& where, pipeline::StageSchedule& s) {
    if (!j) return;
    Strict o(*j, where);
    o.opt("lr", s.lr);
    o.opt("warmup_steps", s.warmup_steps);
    o.opt("total_steps", s.total_steps);
    o.finish();
}

} // namespace

EngineConfig EngineConfig::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": JSON parse error: " + e.what());
    }
    EngineConfig cfg;
    Strict root(j, origin);

    if (const json* e = root.obj("encoder")) {
        Strict o(*e, origin + ".encoder");
        o.opt("num_layers", cfg.encoder.num_layers);
        o.opt("num_heads", cfg.encoder.num_heads);
        o.opt("model_dim", cfg.encoder.model_dim);
        o.opt("conv_kernel", cfg.encoder.conv_kernel);
        o.opt("subsampling_factor", cfg.encoder.subsampling_factor);
        o.opt("chunk_frames", cfg.encoder.chunk_frames);
        o.opt("left_context_chunks", cfg.encoder.left_context_chunks);
        o.opt("mid_layer_index", cfg.encoder.mid_layer_index);
        o.opt("feature_dim", cfg.encoder.feature_dim);
        o.opt("ffn_mult", cfg.encoder.ffn_mult);
        o.opt("max_rel_dist", cfg.encoder.max_rel_dist);
        o.finish();
    }
    if (const json* e = root.obj("lm")) {
        Strict o(*e, origin + ".lm");
        o.opt("num_layers", cfg.lm.num_layers);
        o.opt("num_heads", cfg.lm.num_heads);
        o.opt("model_dim", cfg.lm.model_dim);
        o.opt("max_positions", cfg.lm.max_positions);
        o.finish();
    }
    if (const json* e = root.obj("llm_adapter")) {
        Strict o(*e, origin + ".llm_adapter");
        o.opt("num_layers", cfg.llm_adapter.num_layers);
        o.opt("num_heads", cfg.llm_adapter.num_heads);
        o.opt("ffn_mult", cfg.llm_adapter.ffn_mult);
        o.finish();
    }
    if (const json* e = root.obj("acoustic_adapter")) {
        Strict o(*e, origin + ".acoustic_adapter");
        o.opt("num_layers", cfg.acoustic_adapter.num_layers);
        o.opt("num_heads", cfg.acoustic_adapter.num_heads);
        o.opt("model_dim", cfg.acoustic_adapter.model_dim);
        o.opt("ffn_mult", cfg.acoustic_adapter.ffn_mult);
        o.finish();
    }
    if (const json* e = root.obj("detector")) {
        Strict o(*e, origin + ".detector");
        o.opt("hidden1", cfg.detector.hidden1);
        o.opt("hidden2", cfg.detector.hidden2);
        o.finish();
    }
    if (const json* e = root.obj("training")) {
        Strict o(*e, origin + ".training");
        o.opt("prompt_dropout_p", cfg.training.prompt_dropout_p);
        o.opt("batch_size", cfg.training.batch_size);
        o.opt("seed", cfg.training.seed);
        if (const json* st = o.obj("stages")) {
            Strict s(*st, origin + ".training.stages");
            parse_stage(s.obj("stage1a"), origin + ".training.stages.stage1a", cfg.training.stage1a);
            parse_stage(s.obj("stage1b"), origin + ".training.stages.stage1b", cfg.training.stage1b);
            parse_stage(s.obj("stage2"), origin + ".training.stages.stage2", cfg.training.stage2);
            parse_stage(s.obj("stage3"), origin + ".training.stages.stage3", cfg.training.stage3);
            parse_stage(s.obj("stage4"), origin + ".training.stages.stage4", cfg.training.stage4);
            s.finish();
        }
        o.finish();
    }
    if (const json* e = root.obj("duplex")) {
        Strict o(*e, origin + ".duplex");
        o.opt("tau", cfg.duplex.tau);
        o.opt("k_consecutive", cfg.duplex.k_consecutive);
        o.finish();
    }
    if (const json* e = root.obj("synth")) {
        Strict o(*e, origin + ".synth");
        o.opt("vocab_size", cfg.synth.vocab_size);
        if (const json* ns = o.obj("num_samples")) {
            Strict s(*ns, origin + ".synth.num_samples");
            for (data::TurnState st : data::all_turn_states()) {
                int v = cfg.synth.num_samples[static_cast<std::size_t>(static_cast<int>(st))];
                s.opt(data::to_string(st), v);
                cfg.synth.num_samples[static_cast<std::size_t>(static_cast<int>(st))] = v;
            }
            s.finish();
        }
        o.opt_range("frames_per_token", cfg.synth.frames_per_token_min, cfg.synth.frames_per_token_max);
        o.opt("noise_std", cfg.synth.noise_std);
        o.opt("overlap_prob", cfg.synth.overlap_prob);
        o.opt("overlap_gain", cfg.synth.overlap_gain);
        o.opt("seed", cfg.synth.seed);
        o.opt("feature_dim", cfg.synth.feature_dim);
        o.opt_range("body_len", cfg.synth.body_len_min, cfg.synth.body_len_max);
        o.opt("backchannel_tokens", cfg.synth.backchannel_tokens);
        o.opt_range("trailing_silence", cfg.synth.trailing_silence_min, cfg.synth.trailing_silence_max);
        o.opt("token_mean_seed", cfg.synth.token_mean_seed);
        o.opt("frame_period_ms", cfg.synth.frame_period_ms);
        o.finish();
    }
    if (const json* e = root.obj("paths")) {
        Strict o(*e, origin + ".paths");
        o.opt("train_manifest", cfg.paths.train_manifest);
        o.opt("test_manifest", cfg.paths.test_manifest);
        o.opt("checkpoint_dir", cfg.paths.checkpoint_dir);
        o.opt("report_dir", cfg.paths.report_dir);
        o.finish();
    }
    if (const json* e = root.obj("notes")) {
        for (auto it = e->begin(); it != e->end(); ++it) {
            if (!it.value().is_string()) throw ConfigError(origin + ".notes: values must be strings");
            cfg.notes[it.key()] = it.value().get<std::string>();
        }
    }
    root.finish();
    cfg.validate();
    return cfg;
}

EngineConfig EngineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text, path);
}

void EngineConfig::validate() {
    encoder.validate();
    lm.vocab_size = content_tokens() + 8;
    lm.validate();
    training.validate();
    duplex.validate();
    synth.validate();
    if (synth.feature_dim != encoder.feature_dim)
        throw ConfigError("config: synth.feature_dim must equal encoder.feature_dim");
    if (llm_adapter.num_layers < 1 || acoustic_adapter.num_layers < 1)
        throw ConfigError("config: adapter layer counts must be >= 1");
    if (lm.model_dim % llm_adapter.num_heads != 0)
        throw ConfigError("config: lm.model_dim must be divisible by llm_adapter.num_heads");
    if (acoustic_adapter.model_dim % acoustic_adapter.num_heads != 0)
        throw ConfigError("config: acoustic_adapter.model_dim must be divisible by its num_heads");
    if (detector.hidden1 < 1 || detector.hidden2 < 1)
        throw ConfigError("config: detector hidden sizes must be >= 1");
}

std::string EngineConfig::to_json_text() const {
    json j;
    j["encoder"] = {{"num_layers", encoder.num_layers},
                    {"num_heads", encoder.num_heads},
                    {"model_dim", encoder.model_dim},
                    {"conv_kernel", encoder.conv_kernel},
                    {"subsampling_factor", encoder.subsampling_factor},
                    {"chunk_frames", encoder.chunk_frames},
                    {"left_context_chunks", encoder.left_context_chunks},
                    {"mid_layer_index", encoder.mid_layer_index},
                    {"feature_dim", encoder.feature_dim},
                    {"ffn_mult", encoder.ffn_mult},
                    {"max_rel_dist", encoder.max_rel_dist}};
    j["lm"] = {{"num_layers", lm.num_layers},
               {"num_heads", lm.num_heads},
               {"model_dim", lm.model_dim},
               {"max_positions", lm.max_positions}};
    j["llm_adapter"] = {{"num_layers", llm_adapter.num_layers},
                        {"num_heads", llm_adapter.num_heads},
                        {"ffn_mult", llm_adapter.ffn_mult}};
    j["acoustic_adapter"] = {{"num_layers", acoustic_adapter.num_layers},
                             {"num_heads", acoustic_adapter.num_heads},
                             {"model_dim", acoustic_adapter.model_dim},
                             {"ffn_mult", acoustic_adapter.ffn_mult}};
    j["detector"] = {{"hidden1", detector.hidden1}, {"hidden2", detector.hidden2}};
    auto stage = [](const pipeline::StageSchedule& s) {
        return json{{"lr", s.lr}, {"warmup_steps", s.warmup_steps}, {"total_steps", s.total_steps}};
    };
    j["training"] = {{"prompt_dropout_p", training.prompt_dropout_p},
                     {"batch_size", training.batch_size},
                     {"seed", training.seed},
                     {"stages",
                      {{"stage1a", stage(training.stage1a)},
                       {"stage1b", stage(training.stage1b)},
                       {"stage2", stage(training.stage2)},
                       {"stage3", stage(training.stage3)},
                       {"stage4", stage(training.stage4)}}}};
    j["duplex"] = {{"tau", duplex.tau}, {"k_consecutive", duplex.k_consecutive}};
    j["synth"] = {{"vocab_size", synth.vocab_size},
                  {"num_samples",
                   {{"complete", synth.num_samples[0]},
                    {"incomplete", synth.num_samples[1]},
                    {"backchannel", synth.num_samples[2]},
                    {"wait", synth.num_samples[3]}}},
                  {"frames_per_token", {synth.frames_per_token_min, synth.frames_per_token_max}},
                  {"noise_std", synth.noise_std},
                  {"overlap_prob", synth.overlap_prob},
                  {"overlap_gain", synth.overlap_gain},
                  {"seed", synth.seed},
                  {"feature_dim", synth.feature_dim},
                  {"body_len", {synth.body_len_min, synth.body_len_max}},
                  {"backchannel_tokens", synth.backchannel_tokens},
                  {"trailing_silence", {synth.trailing_silence_min, synth.trailing_silence_max}},
                  {"token_mean_seed", synth.token_mean_seed},
                  {"frame_period_ms", synth.frame_period_ms}};
    j["paths"] = {{"train_manifest", paths.train_manifest},
                  {"test_manifest", paths.test_manifest},
                  {"checkpoint_dir", paths.checkpoint_dir},
                  {"report_dir", paths.report_dir}};
    if (!notes.empty()) j["notes"] = notes;
    return j.dump(2);
}

} // namespace fastturn
