#include "fastturn/cli/commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "fastturn/duplex/session.hpp"
#include "fastturn/evalkit/runner.hpp"
#include "fastturn/nn/kernels.hpp"
#include "fastturn/pipeline/train.hpp"

namespace fastturn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int map_exception() {
    try {
        throw;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const PrereqError& e) {
        std::cerr << "missing prerequisite: " << e.what() << "\n";
        return kExitPrereq;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

std::string stage_ckpt(const EngineConfig& cfg, int stage) {
    return (fs::path(cfg.paths.checkpoint_dir) / ("stage" + std::to_string(stage) + ".ftck")).string();
}

Engine load_engine(const EngineConfig& cfg, const std::string& checkpoint) {
    std::string path = checkpoint;
    if (path.empty()) path = stage_ckpt(cfg, 4);
    if (!fs::exists(path)) throw PrereqError("checkpoint not found: " + path + " (run `fastturn train` first)");
    return Engine::with_params(cfg, nn::ParameterSet::load(path));
}

pipeline::LogSink jsonl_log_sink(std::ofstream& out) {
    return [&out](const pipeline::TrainLogEntry& e) {
        json j = {{"stage", e.stage},
                  {"step", e.step},
                  {"loss", e.loss},
                  {"lr", e.lr},
                  {"timestamp", e.timestamp_ms}};
        out << j.dump() << "\n";
    };
}

} // namespace

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    try {
        EngineConfig cfg = EngineConfig::from_file(config_path);
        data::SynthConfig synth = cfg.synth;
        if (seed_override) synth.seed = *seed_override;
        const auto samples = data::synth_corpus(synth);
        const std::string manifest = data::write_corpus(samples, out_dir);
        std::cout << "wrote " << samples.size() << " samples, manifest " << manifest << "\n";
        return kExitOk;
    } catch (...) {
        return map_exception();
    }
}

int cmd_train(const std::string& config_path, const std::string& stage, bool from_scratch) {
    try {
        EngineConfig cfg = EngineConfig::from_file(config_path);
        const auto corpus = data::load_corpus(cfg.paths.train_manifest);
        if (corpus.empty()) throw ConfigError("training corpus is empty: " + cfg.paths.train_manifest);
        fs::create_directories(cfg.paths.checkpoint_dir);

        auto run_one = [&](int n, Engine& eng) {
            std::ofstream log_out(
                (fs::path(cfg.paths.checkpoint_dir) / ("train_stage" + std::to_string(n) + ".jsonl")).string(),
                std::ios::trunc);
            auto sink = jsonl_log_sink(log_out);
            switch (n) {
                case 1: pipeline::run_stage1(eng, corpus, cfg.training, sink); break;
                case 2: pipeline::run_stage2(eng, corpus, cfg.training, sink); break;
                case 3: pipeline::run_stage3(eng, corpus, cfg.training, sink); break;
                case 4: pipeline::run_stage4(eng, corpus, cfg.training, sink); break;
                default: throw ConfigError("stage must be 1..4 or all");
            }
            eng.params.save(stage_ckpt(cfg, n));
            std::cout << "stage " << n << " done -> " << stage_ckpt(cfg, n) << "\n";
        };

        const auto write_vocab = [&](const Engine& eng) {
            eng.vocab.save((fs::path(cfg.paths.checkpoint_dir) / "vocab.json").string());
        };

        if (stage == "all") {
            Engine eng = Engine::init(cfg);
            write_vocab(eng);
            for (int n = 1; n <= 4; ++n) run_one(n, eng);
            return kExitOk;
        }
        const int n = std::stoi(stage);
        if (n < 1 || n > 4) throw ConfigError("stage must be 1..4 or all");
        Engine eng = [&]() {
            if (n == 1) {
                if (!from_scratch && fs::exists(stage_ckpt(cfg, 1)))
                    std::cerr << "note: stage 1 restarts from fresh parameters\n";
                return Engine::init(cfg);
            }
            const std::string prev = stage_ckpt(cfg, n - 1);
            if (!fs::exists(prev))
                throw PrereqError("stage " + std::to_string(n) + " requires checkpoint " + prev);
            return Engine::with_params(cfg, nn::ParameterSet::load(prev));
        }();
        write_vocab(eng);
        run_one(n, eng);
        return kExitOk;
    } catch (...) {
        return map_exception();
    }
}

int cmd_eval(const std::string& config_path, const std::string& manifest, const std::string& mode,
             const std::string& checkpoint, const std::string& report_name) {
    try {
        EngineConfig cfg = EngineConfig::from_file(config_path);
        Engine eng = load_engine(cfg, checkpoint);
        const auto samples = data::load_corpus(manifest.empty() ? cfg.paths.test_manifest : manifest);
        if (samples.empty()) throw ConfigError("evaluation manifest is empty");

        evalkit::EvalOptions opt;
        opt.test_set_name = fs::path(manifest.empty() ? cfg.paths.test_manifest : manifest)
                                .parent_path()
                                .filename()
                                .string();
        const EngineMode m = engine_mode_from_string(mode);
        evalkit::EvalOutcome out = evalkit::run_eval(eng, m, samples, opt);

        fs::create_directories(cfg.paths.report_dir);
        const std::string name = report_name.empty() ? std::string("eval_") + to_string(m) : report_name;
        evalkit::emit_report(out.report, (fs::path(cfg.paths.report_dir) / name).string());
        std::cout << out.report.render_table();
        return kExitOk;
    } catch (...) {
        return map_exception();
    }
}

int cmd_stream(const std::string& config_path, const std::string& feature_file, const std::string& mode,
               double realtime_factor, const std::string& checkpoint) {
    try {
        EngineConfig cfg = EngineConfig::from_file(config_path);
        Engine eng = load_engine(cfg, checkpoint);
        const data::FeatureMatrix feats = data::read_features(feature_file);
        if (feats.num_frames < 1) throw ConfigError("feature file has no frames: " + feature_file);

        duplex::SteadyClock clock;
        duplex::SessionOptions so;
        so.mode = engine_mode_from_string(mode);
        so.tau = cfg.duplex.tau;
        so.k_consecutive = cfg.duplex.k_consecutive;
        so.early_exit = true;
        duplex::Session session(eng, so, clock);

        const int cf = cfg.encoder.chunk_frames;
        auto emit = [](const duplex::SessionEvent& e) {
            json j = {{"t_ms", e.t_ms}, {"event_type", e.type}, {"payload", json::parse(e.payload_json)}};
            std::cout << j.dump() << "\n";
        };
        for (int f = 0; f < feats.num_frames; f += cf) {
            const int n = std::min(cf, feats.num_frames - f);
            if (realtime_factor > 0.0) {
                const double ms = feats.frame_period_ms * n / realtime_factor;
                std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
            }
            for (const auto& e :
                 session.feed_frames(feats.values.data() + static_cast<std::size_t>(f) * feats.dim, n,
                                     clock.now_ms()))
                emit(e);
        }
        duplex::DecisionRecord rec = session.finalize_segment(clock.now_ms());
        json payload = {{"state", data::to_string(rec.state)},
                        {"confidence", rec.confidence},
                        {"action", duplex::to_string(duplex::policy(rec.state))},
                        {"early", rec.early},
                        {"latency_ms", duplex::latency_ms(rec)},
                        {"lead_time_ms", duplex::lead_time_ms(rec)},
                        {"frames_consumed_at_decision", rec.frames_consumed_at_decision}};
        emit({rec.t_decision_ms, "final_decision", payload.dump()});
        return kExitOk;
    } catch (...) {
        return map_exception();
    }
}

int cmd_bench_latency(const std::string& config_path, const std::string& manifest,
                      const std::string& checkpoint, int max_samples) {
    try {
        EngineConfig cfg = EngineConfig::from_file(config_path);
        Engine eng = load_engine(cfg, checkpoint);
        auto samples = data::load_corpus(manifest.empty() ? cfg.paths.test_manifest : manifest);
        if (samples.empty()) throw ConfigError("benchmark manifest is empty");
        if (max_samples > 0 && static_cast<int>(samples.size()) > max_samples)
            samples.resize(static_cast<std::size_t>(max_samples));

        // latency benchmarking pins to one worker
        nn::kernels::set_num_threads(1);
        evalkit::BenchOutcome out =
            evalkit::bench_latency(eng, samples, cfg.duplex.tau, cfg.duplex.k_consecutive);

        json j = {{"n_samples", out.n_samples},
                  {"unified",
                   {{"mean_ms", out.unified.mean}, {"p50_ms", out.unified.p50}, {"p95_ms", out.unified.p95}}},
                  {"cascaded_ar",
                   {{"mean_ms", out.cascaded_ar.mean},
                    {"p50_ms", out.cascaded_ar.p50},
                    {"p95_ms", out.cascaded_ar.p95}}},
                  {"unified_early_rate", out.unified_early_rate}};
        fs::create_directories(cfg.paths.report_dir);
        const std::string path = (fs::path(cfg.paths.report_dir) / "bench_latency.json").string();
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw IoError("cannot write " + path);
        f << j.dump(2) << "\n";
        std::cout << j.dump(2) << "\n";
        return kExitOk;
    } catch (...) {
        return map_exception();
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"fastturn: streaming turn-detection engine"};
    app.require_subcommand(1);

    int threads = 1;
    app.add_option("--threads", threads, "worker threads for parallel kernels/eval");

    std::string config_path = "fastturn.json";
    std::string out_dir = "corpus";
    std::optional<std::uint64_t> seed;
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--config", config_path)->required();
    synth->add_option("--out", out_dir)->required();
    std::uint64_t seed_val = 0;
    auto* seed_opt = synth->add_option("--seed", seed_val, "override synth.seed");

    std::string stage = "all";
    bool from_scratch = false;
    auto* train = app.add_subcommand("train", "run the staged training pipeline");
    train->add_option("--config", config_path)->required();
    train->add_option("--stage", stage, "1|2|3|4|all");
    train->add_flag("--from-scratch", from_scratch);

    std::string manifest, mode = "unified", checkpoint, report_name;
    auto* eval = app.add_subcommand("eval", "evaluate a manifest");
    eval->add_option("--config", config_path)->required();
    eval->add_option("--manifest", manifest);
    eval->add_option("--mode", mode, "cascaded|semantic|unified");
    eval->add_option("--checkpoint", checkpoint);
    eval->add_option("--report-name", report_name);

    std::string feature_file;
    double realtime_factor = 0.0;
    auto* stream = app.add_subcommand("stream", "replay one feature stream, events to stdout");
    stream->add_option("--config", config_path)->required();
    stream->add_option("--features", feature_file)->required();
    stream->add_option("--mode", mode);
    stream->add_option("--realtime-factor", realtime_factor, "0 = as fast as possible");
    stream->add_option("--checkpoint", checkpoint);

    int max_samples = 0;
    auto* bench = app.add_subcommand("bench-latency", "unified vs cascaded-with-AR-decode latency");
    bench->add_option("--config", config_path)->required();
    bench->add_option("--manifest", manifest);
    bench->add_option("--checkpoint", checkpoint);
    bench->add_option("--max-samples", max_samples);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    nn::kernels::set_num_threads(threads);
    if (synth->parsed()) {
        if (seed_opt->count() > 0) seed = seed_val;
        return cmd_synth(config_path, out_dir, seed);
    }
    if (train->parsed()) return cmd_train(config_path, stage, from_scratch);
    if (eval->parsed()) return cmd_eval(config_path, manifest, mode, checkpoint, report_name);
    if (stream->parsed()) return cmd_stream(config_path, feature_file, mode, realtime_factor, checkpoint);
    if (bench->parsed()) return cmd_bench_latency(config_path, manifest, checkpoint, max_samples);
    return kExitConfig;
}

} // namespace fastturn::cli
