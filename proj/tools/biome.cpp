// biome: feature extraction, distillation training, profiling, probing and
// figure rendering for the modulation-aware bioacoustic encoder.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "biome/plot.hpp"
#include "biome/probe.hpp"
#include "biome/profiler.hpp"
#include "biome/storage.hpp"
#include "biome/version.hpp"
#include "biome/wav.hpp"

namespace fs = std::filesystem;
using namespace biome;
using io::json;

namespace {

uint64_t env_seed_default() {
    const char* s = std::getenv("BIOME_SEED");
    if (!s) return 0;
    return std::strtoull(s, nullptr, 10);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---- extract ----

struct ExtractArgs {
    std::string input, out;
    std::string features = "mel,msab";
    int nfft = 256;
    int mels = 128;
    double win = 0.025, hop = 0.010;
};

int cmd_extract(const ExtractArgs& a) {
    dsp::AudioClip clip = io::read_wav(a.input);
    if (clip.sample_rate != dsp::kModelSampleRate)
        clip = dsp::resample(clip, dsp::kModelSampleRate);

    dsp::MelConfig mel_cfg;
    mel_cfg.n_mels = a.mels;
    mel_cfg.win_seconds = a.win;
    mel_cfg.hop_seconds = a.hop;

    io::TensorArchive ar;
    json sidecar;
    sidecar["sample_rate"] = dsp::kModelSampleRate;
    sidecar["n_mels"] = a.mels;
    sidecar["win_seconds"] = a.win;
    sidecar["hop_seconds"] = a.hop;
    sidecar["msab_resolution"] = a.nfft;

    for (const std::string& f : split_csv(a.features)) {
        if (f == "mel") {
            ar.put("mel", dsp::mel_spectrogram(clip, mel_cfg).values, io::TensorArchive::DType::F32);
        } else if (f == "patches") {
            dsp::PatchSequence p = dsp::patchify(dsp::mel_spectrogram(clip, mel_cfg));
            ar.put("patches", p.patches, io::TensorArchive::DType::F32);
            sidecar["patch_grid"] = {p.freq_patches, p.time_patches};
        } else if (f == "modspec") {
            dsp::ModulationSpectrogram m = dsp::modulation_map(clip, a.nfft);
            ar.put("modspec", m.values, io::TensorArchive::DType::F32);
            sidecar["acoustic_bin_hz"] = m.acoustic_bin_hz;
            sidecar["mod_bin_hz"] = m.mod_bin_hz;
            sidecar["zero_padded"] = m.zero_padded;
            sidecar["segments_averaged"] = m.segments_averaged;
        } else if (f == "msab") {
            ar.put_vector("msab", dsp::msab_features(clip, a.nfft).values,
                          io::TensorArchive::DType::F32);
        } else {
            throw InputError("extract: unknown feature '" + f + "' (want mel|modspec|msab|patches)");
        }
    }

    io::RunManifest man;
    man.config = sidecar;
    man.seed = 0;
    man.tool_version = kVersion;
    man.input_hashes[a.input] = io::hex64(io::file_hash(a.input));
    man.outputs = {a.out, a.out + ".json"};
    io::write_manifest(a.out + ".manifest.json", man);

    ar.write_file(a.out);
    io::write_json_file(a.out + ".json", sidecar);
    std::cout << "wrote " << a.out << " (" << ar.size() << " tensors)\n";
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::string config, out;
    std::string wav_dir;
    int64_t seed = -1;  // -1: take from config / env
};

int cmd_train(const TrainArgs& a) {
    distill::TrainConfig cfg = io::train_config_from_json(io::read_json_file(a.config));
    if (a.seed >= 0) cfg.sched.seed = static_cast<uint64_t>(a.seed);

    fs::create_directories(a.out);
    const std::string metrics_path = (fs::path(a.out) / "metrics.csv").string();
    const std::string ckpt_stem = (fs::path(a.out) / "checkpoint_final").string();

    io::RunManifest man;
    man.config = io::to_json(cfg);
    man.seed = cfg.sched.seed;
    man.tool_version = kVersion;
    man.input_hashes[a.config] = io::hex64(io::file_hash(a.config));
    man.outputs = {metrics_path, ckpt_stem + ".bin", ckpt_stem + ".json"};
    io::write_manifest((fs::path(a.out) / "manifest.json").string(), man);

    distill::Trainer trainer(cfg);

    // Optional WAV-directory data source; otherwise the synthetic generator.
    std::vector<dsp::AudioClip> wav_clips;
    if (!a.wav_dir.empty()) {
        std::vector<std::string> paths;
        for (const auto& e : fs::directory_iterator(a.wav_dir))
            if (e.path().extension() == ".wav") paths.push_back(e.path().string());
        std::sort(paths.begin(), paths.end());
        require(!paths.empty(), "train: no .wav files in '" + a.wav_dir + "'");
        for (const auto& p : paths) wav_clips.push_back(io::read_wav(p));
    }
    auto batch_at = [&](int step) {
        if (wav_clips.empty()) return trainer.make_batch(step);
        distill::DistillBatch b;
        const int base = cfg.overfit_one_batch ? 0 : step * cfg.sched.batch_size;
        for (int i = 0; i < cfg.sched.batch_size; ++i)
            trainer.append_clip(b, wav_clips[static_cast<size_t>(base + i) % wav_clips.size()]);
        b.validate();
        return b;
    };

    std::ofstream csv(metrics_path, std::ios::trunc);
    csv << io::metrics_csv_header(cfg.distill_layers) << "\n";

    std::optional<distill::DistillBatch> fixed_batch;
    std::vector<enc::LayerActivations> fixed_teacher;
    if (cfg.overfit_one_batch) {
        fixed_batch = batch_at(0);
        fixed_teacher = trainer.teacher_forward(*fixed_batch);
    }

    json state;
    state["seed"] = cfg.sched.seed;
    std::vector<double> history;
    try {
        for (int step = 0; step < cfg.sched.total_steps; ++step) {
            distill::LossBreakdown bd =
                cfg.overfit_one_batch ? trainer.train_step(*fixed_batch, fixed_teacher, step)
                                      : trainer.train_step(batch_at(step), step);
            csv << io::metrics_csv_row(step, distill::lr_at(step, cfg.sched), bd) << "\n";
            history.push_back(bd.total);
            if (cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0 &&
                step + 1 < cfg.sched.total_steps) {
                json s = state;
                s["step"] = step + 1;
                s["loss_history"] = history;
                io::save_checkpoint((fs::path(a.out) / ("checkpoint_step" + std::to_string(step + 1))).string(),
                                    trainer.student(), &trainer.heads(), s);
            }
        }
    } catch (const NumericalError&) {
        csv.flush();
        json s = state;
        s["step"] = static_cast<int>(history.size());
        s["loss_history"] = history;
        s["aborted"] = true;
        io::save_checkpoint(ckpt_stem, trainer.student(), &trainer.heads(), s);
        throw;
    }
    state["step"] = cfg.sched.total_steps;
    state["loss_history"] = history;
    io::save_checkpoint(ckpt_stem, trainer.student(), &trainer.heads(), state);
    std::cout << "trained " << cfg.sched.total_steps << " steps; final loss "
              << io::format_double(history.empty() ? 0.0 : history.back()) << "\n";
    return 0;
}

// ---- profile ----

struct ProfileArgs {
    std::string size, config, format = "table";
    double duration = 1.0;
    int bytes = 4;
};

int cmd_profile(const ProfileArgs& a) {
    enc::EncoderConfig cfg;
    if (!a.config.empty())
        cfg = io::encoder_config_from_json(io::read_json_file(a.config));
    else
        cfg = enc::build_config(a.size);
    profiler::ProfileReport r = profiler::profile(cfg, a.duration, a.bytes);

    const profiler::ReferenceFigures* ref = nullptr;
    for (const auto& f : profiler::reference_figures())
        if (r.size_name == f.name) ref = &f;

    if (a.format == "json") {
        json j;
        j["size"] = r.size_name;
        j["param_count"] = r.param_count;
        j["mmacs_per_s"] = r.mmacs_per_s;
        j["peak_mem_bytes_estimate"] = r.peak_mem_bytes_estimate;
        j["audio_seconds"] = r.audio_seconds;
        j["bytes_per_scalar"] = r.bytes_per_scalar;
        j["tokens"] = r.tokens;
        j["params_by_component"] = r.params_by_component;
        j["macs_by_component"] = r.macs_by_component;
        if (ref) {
            j["reference"] = {{"params_millions", ref->params_millions},
                              {"mmacs_per_s", ref->mmacs_per_s},
                              {"peak_gb_5min", ref->peak_gb_5min}};
        }
        std::cout << j.dump(2) << "\n";
    } else if (a.format == "csv") {
        std::cout << "size,param_count,mmacs_per_s,peak_mem_bytes_estimate,audio_seconds,tokens\n"
                  << r.size_name << "," << r.param_count << "," << io::format_double(r.mmacs_per_s)
                  << "," << r.peak_mem_bytes_estimate << "," << io::format_double(r.audio_seconds)
                  << "," << r.tokens << "\n";
    } else {
        std::cout << "model size        : " << r.size_name << "\n";
        std::cout << "audio duration    : " << io::format_double(r.audio_seconds) << " s ("
                  << r.tokens << " tokens)\n";
        std::cout << "parameters        : " << r.param_count << " ("
                  << io::format_double(r.param_count / 1e6) << "M)\n";
        for (const auto& [k, v] : r.params_by_component)
            std::cout << "  " << k << std::string(16 - k.size(), ' ') << ": " << v << "\n";
        std::cout << "mmacs per second  : " << io::format_double(r.mmacs_per_s) << "\n";
        std::cout << "peak memory (est) : " << r.peak_mem_bytes_estimate << " bytes ("
                  << io::format_double(r.peak_mem_bytes_estimate / 1073741824.0) << " GiB at "
                  << r.bytes_per_scalar << " B/scalar)\n";
        if (ref) {
            std::cout << "reference figures : " << io::format_double(ref->params_millions)
                      << "M params, " << io::format_double(ref->mmacs_per_s) << " MMACs/s (1 s), "
                      << io::format_double(ref->peak_gb_5min)
                      << " GB peak for 5 min (measured with framework overhead; the analytic"
                         " estimate above is a lower bound)\n";
        }
    }
    return 0;
}

// ---- probe ----

struct ProbeArgs {
    std::string checkpoint, task, out;
    bool plot = false;
    std::string pooling = "mean";
    int fit_steps = 4000;
};

probe::TaskKind task_kind_from_string(const std::string& s) {
    if (s == "binary_classification") return probe::TaskKind::BinaryClassification;
    if (s == "multiclass") return probe::TaskKind::Multiclass;
    if (s == "regression") return probe::TaskKind::Regression;
    if (s == "detection") return probe::TaskKind::Detection;
    throw InputError("task: unknown kind '" + s + "'");
}

probe::Metric metric_from_string(const std::string& s) {
    if (s == "accuracy") return probe::Metric::Accuracy;
    if (s == "map") return probe::Metric::MeanAP;
    if (s == "roc_auc") return probe::Metric::RocAuc;
    if (s == "mae") return probe::Metric::Mae;
    if (s == "f1") return probe::Metric::F1;
    throw InputError("task: unknown metric '" + s + "'");
}

int cmd_probe(const ProbeArgs& a) {
    enc::EncoderWeights model = io::load_encoder_checkpoint(a.checkpoint);
    const json task_json = io::read_json_file(a.task);
    require(task_json.contains("kind") && task_json.contains("clips"), "task: needs kind and clips");

    probe::ProbeTask task;
    task.kind = task_kind_from_string(task_json["kind"].get<std::string>());
    task.metric = metric_from_string(task_json.value("metric", std::string("accuracy")));

    const fs::path task_dir = fs::path(a.task).parent_path();
    std::vector<dsp::AudioClip> clips;
    std::vector<json> labels;
    for (const auto& c : task_json["clips"]) {
        fs::path p = c["path"].get<std::string>();
        if (p.is_relative()) p = task_dir / p;
        clips.push_back(io::read_wav(p.string()));
        labels.push_back(c);
    }
    require(!clips.empty(), "task: no clips");

    const probe::Pooling pooling =
        a.pooling == "first" ? probe::Pooling::FirstToken : probe::Pooling::Mean;
    task.embeddings = Mat(static_cast<int>(clips.size()), model.cfg.d_model);
    for (size_t i = 0; i < clips.size(); ++i) {
        const std::vector<double> e = probe::clip_embedding(model, clips[i], pooling);
        for (int j = 0; j < model.cfg.d_model; ++j) task.embeddings.at(static_cast<int>(i), j) = e[static_cast<size_t>(j)];
    }

    if (task.kind == probe::TaskKind::Regression) {
        for (const auto& l : labels) task.target_values.push_back(l["value"].get<double>());
    } else if (task.kind == probe::TaskKind::Detection) {
        int n_cls = task_json.value("n_classes", 0);
        for (const auto& l : labels)
            for (int v : l["labels"].get<std::vector<int>>()) n_cls = std::max(n_cls, v + 1);
        task.multi_labels = Mat::zeros(static_cast<int>(labels.size()), n_cls);
        for (size_t i = 0; i < labels.size(); ++i)
            for (int v : labels[i]["labels"].get<std::vector<int>>())
                task.multi_labels.at(static_cast<int>(i), v) = 1.0;
    } else {
        for (const auto& l : labels) task.class_labels.push_back(l["label"].get<int>());
    }

    probe::FitOptions fo;
    fo.steps = a.fit_steps;
    probe::ProbeWeights pw = probe::fit_linear_probe(task, fo);
    Mat scores = probe::probe_scores(pw, task.embeddings);
    const double metric_value = probe::compute_metric(scores, task, task.metric);

    json result;
    result["metric"] = task_json.value("metric", std::string("accuracy"));
    result["value"] = metric_value;
    result["n_clips"] = clips.size();
    result["checkpoint"] = a.checkpoint;

    std::string out_dir = a.out;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        io::write_json_file((fs::path(out_dir) / "probe_results.json").string(), result);
        std::ofstream csv((fs::path(out_dir) / "probe_results.csv").string(), std::ios::trunc);
        csv << "metric,value,n_clips\n"
            << result["metric"].get<std::string>() << "," << io::format_double(metric_value) << ","
            << clips.size() << "\n";
    }
    std::cout << result["metric"].get<std::string>() << " = " << io::format_double(metric_value)
              << "\n";

    if (a.plot) {
        require(!out_dir.empty(), "probe: --plot needs --out");
        std::vector<int> plot_labels;
        if (!task.class_labels.empty()) plot_labels = task.class_labels;
        else plot_labels.assign(clips.size(), 0);
        Mat proj = probe::pca_project_2d(task.embeddings);
        plot::save_scatter_png((fs::path(out_dir) / "probe_projection.png").string(), proj,
                               plot_labels);

        probe::TargetSelector sel;
        if (task.kind != probe::TaskKind::Regression) {
            sel.kind = probe::TargetSelector::Kind::ProbeLogit;
            sel.probe = &pw;
            sel.class_index = 0;
        }
        probe::SaliencyMap sal = probe::saliency_map(model, clips[0], sel);
        io::TensorArchive sar;
        sar.put("saliency", sal.values, io::TensorArchive::DType::F32);
        sar.write_file((fs::path(out_dir) / "probe_saliency.bin").string());
        plot::save_heatmap_png((fs::path(out_dir) / "probe_saliency.png").string(), sal.values,
                               "time (frames)", "mel bin");
    }
    return 0;
}

// ---- plot ----

struct PlotArgs {
    std::string archive, kind = "spectrogram", out, name;
};

int cmd_plot(const PlotArgs& a) {
    io::TensorArchive ar = io::TensorArchive::read_file(a.archive);
    std::string tensor = a.name;
    std::string xlabel, ylabel;
    if (a.kind == "spectrogram") {
        if (tensor.empty()) tensor = "mel";
        xlabel = "time (frames)";
        ylabel = "mel bin";
    } else if (a.kind == "modspec") {
        if (tensor.empty()) tensor = "modspec";
        xlabel = "f_mod (hz)";
        ylabel = "f (hz)";
    } else if (a.kind == "saliency") {
        if (tensor.empty()) tensor = "saliency";
        xlabel = "time (frames)";
        ylabel = "mel bin";
    } else {
        throw InputError("plot: unknown kind '" + a.kind + "'");
    }
    plot::save_heatmap_png(a.out, ar.get_mat(tensor), xlabel, ylabel);
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---- synth ----

struct SynthArgs {
    std::string out;
    std::string kind = "am-rates";
    int classes = 3;
    int per_class = 12;
    double seconds = 2.0;
    uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
    require(a.classes >= 2 && a.per_class >= 1, "synth: need >= 2 classes, >= 1 clip each");
    fs::create_directories(a.out);
    Rng rng(a.seed);
    json manifest;
    manifest["kind"] = a.classes == 2 ? "binary_classification" : "multiclass";
    manifest["metric"] = a.classes == 2 ? "roc_auc" : "accuracy";
    manifest["clips"] = json::array();
    for (int c = 0; c < a.classes; ++c) {
        for (int i = 0; i < a.per_class; ++i) {
            Rng clip_rng = rng.fork(static_cast<uint64_t>(c) * 1000 + static_cast<uint64_t>(i));
            dsp::AudioClip clip = a.kind == "mixed" ? synth::training_clip(clip_rng, a.seconds)
                                                    : synth::am_task_clip(c, clip_rng, a.seconds);
            const std::string name =
                "class" + std::to_string(c) + "_" + std::to_string(i) + ".wav";
            io::write_wav_pcm16((fs::path(a.out) / name).string(), clip);
            manifest["clips"].push_back({{"path", name}, {"label", c}});
        }
    }
    io::write_json_file((fs::path(a.out) / "manifest.json").string(), manifest);
    std::cout << "wrote " << a.classes * a.per_class << " clips + manifest.json to " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modulation-aware bioacoustic encoder toolkit"};
    app.require_subcommand(1);

    ExtractArgs ex;
    auto* sx = app.add_subcommand("extract", "extract DSP features from a WAV file");
    sx->add_option("input", ex.input, "input WAV (PCM16 or float32)")->required();
    sx->add_option("--features", ex.features, "comma list: mel,modspec,msab,patches [mel,msab]");
    sx->add_option("--out", ex.out, "output tensor archive")->required();
    sx->add_option("--nfft", ex.nfft, "modulation map resolution; MSAB dim is 2x this [256]");
    sx->add_option("--mels", ex.mels, "mel bands [128]");
    sx->add_option("--win", ex.win, "mel window seconds [0.025]");
    sx->add_option("--hop", ex.hop, "mel hop seconds [0.010]");

    TrainArgs tr;
    auto* st = app.add_subcommand("train", "run desk-scale layer-matching distillation");
    st->add_option("--config", tr.config, "training config JSON")->required();
    st->add_option("--out", tr.out, "output directory")->required();
    st->add_option("--wav-dir", tr.wav_dir, "train on WAVs from this directory instead of synthetic clips");
    st->add_option("--seed", tr.seed, "seed override");

    ProfileArgs pr;
    auto* sp = app.add_subcommand("profile", "parameter/compute/memory accounting");
    sp->add_option("--size", pr.size, "edge|small|base");
    sp->add_option("--config", pr.config, "encoder config JSON (instead of --size)");
    sp->add_option("--duration", pr.duration, "audio seconds for MACs/memory [1.0]");
    sp->add_option("--format", pr.format, "table|json|csv [table]");
    sp->add_option("--bytes", pr.bytes, "bytes per scalar for the memory estimate [4]");

    ProbeArgs pb;
    auto* sb = app.add_subcommand("probe", "linear probe on frozen encoder embeddings");
    sb->add_option("--checkpoint", pb.checkpoint, "encoder checkpoint .bin")->required();
    sb->add_option("--task", pb.task, "task manifest JSON")->required();
    sb->add_option("--out", pb.out, "output directory for results/figures");
    sb->add_flag("--plot", pb.plot, "emit projection and saliency PNG figures");
    sb->add_option("--pooling", pb.pooling, "mean|first [mean]");
    sb->add_option("--fit-steps", pb.fit_steps, "probe fit iterations [4000]");

    PlotArgs pl;
    auto* sl = app.add_subcommand("plot", "render a tensor archive entry to PNG");
    sl->add_option("archive", pl.archive, "tensor archive")->required();
    sl->add_option("--kind", pl.kind, "spectrogram|modspec|saliency [spectrogram]");
    sl->add_option("--out", pl.out, "output PNG path")->required();
    sl->add_option("--name", pl.name, "tensor name override");

    SynthArgs sy;
    auto* ss = app.add_subcommand("synth", "write synthetic labelled clips + task manifest");
    ss->add_option("--out", sy.out, "output directory")->required();
    ss->add_option("--kind", sy.kind, "am-rates|mixed [am-rates]");
    ss->add_option("--classes", sy.classes, "number of classes [3]");
    ss->add_option("--per-class", sy.per_class, "clips per class [12]");
    ss->add_option("--seconds", sy.seconds, "clip length [2.0]");
    ss->add_option("--seed", sy.seed, "generator seed [BIOME_SEED or 0]");
    sy.seed = env_seed_default();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // usage problems are input errors
    }

    try {
        if (sx->parsed()) return cmd_extract(ex);
        if (st->parsed()) return cmd_train(tr);
        if (sp->parsed()) return cmd_profile(pr);
        if (sb->parsed()) return cmd_probe(pb);
        if (sl->parsed()) return cmd_plot(pl);
        if (ss->parsed()) return cmd_synth(sy);
    } catch (const ShapeError& e) {
        std::cerr << "shape/config mismatch: " << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
