// crashbench: streaming evaluation and explainability toolkit for
// ego-centric collision anticipation benchmarks.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "crashbench/distill.hpp"
#include "crashbench/heatmap.hpp"
#include "crashbench/manifest.hpp"
#include "crashbench/metrics.hpp"
#include "crashbench/report.hpp"
#include "crashbench/scorer.hpp"
#include "crashbench/streaming.hpp"
#include "crashbench/vlmprob.hpp"

namespace fs = std::filesystem;
using namespace crashbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string resolve_scorer_spec(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("CRASHBENCH_SCORER")) {
    return "subprocess:" + std::string(env);
  }
  return "";
}

struct EvaluateArgs {
  std::string manifest_path;
  std::string traces_path;
  std::string scorer_spec;
  std::string model_name;
  std::string out_dir = ".";
  double threshold = 0.75;
  int stride = 1;
  int jobs = 1;
  std::uint64_t seed = 0;
};

int cmd_evaluate(const EvaluateArgs& args) {
  std::vector<std::string> warnings;
  const Manifest manifest = load_manifest(args.manifest_path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (manifest.clips.empty()) {
    std::cerr << "error: manifest has no clips\n";
    return kExitValidation;
  }

  std::vector<ScoreTrace> traces;
  const std::string scorer_spec = resolve_scorer_spec(args.scorer_spec);
  if (!args.traces_path.empty()) {
    if (fs::is_directory(args.traces_path)) {
      for (const auto& clip : manifest.clips) {
        const fs::path p = fs::path(args.traces_path) / (clip.clip_id + ".jsonl");
        if (fs::exists(p)) traces.push_back(load_trace(p));
      }
    } else {
      traces = load_traces(args.traces_path);
    }
  } else if (!scorer_spec.empty()) {
    // Stream every clip with synthetic frames; per-clip noise comes from the
    // clip id so equal seeds still give distinct clips distinct traces.
    traces.resize(manifest.clips.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= manifest.clips.size() || failed.load()) break;
        const auto& clip = manifest.clips[i];
        try {
          auto scorer = make_scorer(scorer_spec);
          const int frames =
              static_cast<int>(std::lround(clip.duration_s * clip.fps));
          SyntheticFrameSource source(clip.clip_id, frames,
                                      args.seed ^ fnv1a(clip.clip_id),
                                      clip.fps);
          StreamOptions opts;
          opts.threshold = args.threshold;
          opts.stride = args.stride;
          StreamResult result = run_stream(source, *scorer, opts);
          if (!result.complete) {
            throw BackendError("clip " + clip.clip_id + ": " + result.error);
          }
          traces[i] = std::move(result.trace);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          failed.store(true);
          try {
            throw;
          } catch (const std::exception& e) {
            failure = e.what();
          }
        }
      }
    };
    const int n_jobs = std::max(1, args.jobs);
    std::vector<std::thread> pool;
    for (int j = 0; j < n_jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) throw BackendError(failure);
  } else {
    std::cerr << "error: evaluate needs --traces or --scorer "
                 "(or CRASHBENCH_SCORER)\n";
    return kExitValidation;
  }

  MetricsReport report = evaluate(manifest, traces, args.threshold);
  report.model_name = args.model_name;
  fs::create_directories(args.out_dir);
  const fs::path report_path = fs::path(args.out_dir) / "report.json";
  save_report(report, report_path);

  const auto rendered =
      render_table(longtail_rows(report), TableSpec::builtin("longtail"));
  std::cout << rendered.text;
  std::cout << "report written to " << report_path.string() << "\n";
  return kExitOk;
}

struct StreamArgs {
  std::string frames_dir;
  std::string clip_id = "clip";
  std::string synthetic_spec;
  std::string scorer_spec;
  std::string out_dir = ".";
  double threshold = 0.75;
  int stride = 1;
  double fps = 8.0;
  bool re_arm = false;
  double refractory_s = 2.0;
  bool subprocess_no_pixels = false;
};

std::unique_ptr<FrameSource> make_stream_source(const StreamArgs& args) {
  if (!args.frames_dir.empty()) {
    return std::make_unique<DirectoryFrameSource>(args.frames_dir,
                                                  args.clip_id, args.fps);
  }
  if (!args.synthetic_spec.empty()) {
    int frames = 72;
    std::uint64_t seed = 0;
    std::string pattern = "noise";
    size_t pos = 0;
    const std::string& text = args.synthetic_spec;
    while (pos < text.size()) {
      size_t comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      const std::string item = text.substr(pos, comma - pos);
      const size_t eq = item.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("synthetic spec: expected key=value in '" +
                              item + "'");
      }
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (key == "frames") {
        frames = std::stoi(value);
      } else if (key == "seed") {
        seed = std::stoull(value);
      } else if (key == "pattern") {
        pattern = value;
      } else {
        throw ValidationError("synthetic spec: unknown key '" + key + "'");
      }
      pos = comma + 1;
    }
    return std::make_unique<SyntheticFrameSource>(args.clip_id, frames, seed,
                                                  args.fps, pattern);
  }
  throw ValidationError("stream needs --frames or --synthetic");
}

int cmd_stream(const StreamArgs& args) {
  const std::string scorer_spec = resolve_scorer_spec(args.scorer_spec);
  if (scorer_spec.empty()) {
    std::cerr << "error: stream needs --scorer (or CRASHBENCH_SCORER)\n";
    return kExitValidation;
  }
  auto source = make_stream_source(args);
  auto scorer = make_scorer(scorer_spec, !args.subprocess_no_pixels);

  StreamOptions opts;
  opts.threshold = args.threshold;
  opts.stride = args.stride;
  opts.re_arm = args.re_arm;
  opts.refractory_s = args.refractory_s;
  const StreamResult result = run_stream(*source, *scorer, opts);

  fs::create_directories(args.out_dir);
  save_trace(result.trace, fs::path(args.out_dir) / "trace.jsonl");
  save_alerts(result.alerts, fs::path(args.out_dir) / "alerts.jsonl");
  save_latency_report(result.latency, fs::path(args.out_dir) / "latency.json");

  std::printf("windows: %lld  frames preprocessed: %lld\n",
              static_cast<long long>(result.latency.windows_measured),
              static_cast<long long>(result.latency.frames_preprocessed));
  std::printf("preprocessing ms  mean %.4f  p50 %.4f  p99 %.4f\n",
              result.latency.preprocessing.mean_ms,
              result.latency.preprocessing.p50_ms,
              result.latency.preprocessing.p99_ms);
  std::printf("inference     ms  mean %.4f  p50 %.4f  p99 %.4f\n",
              result.latency.inference.mean_ms, result.latency.inference.p50_ms,
              result.latency.inference.p99_ms);
  for (const auto& alert : result.alerts) {
    std::printf("alert at %.3f s (score %.3f >= %.2f)\n", alert.alert_time_s,
                alert.score, alert.threshold);
  }
  if (!result.complete) {
    std::cerr << "error: stream aborted: " << result.error
              << " (partial outputs written)\n";
    return kExitBackend;
  }
  return kExitOk;
}

struct HeatmapArgs {
  std::string attn_path;
  std::string boxes_path;
  std::string out_dir = ".";
  double temporal_T = 2.0;
};

std::vector<GtBox> load_boxes_json(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ValidationError("cannot open " + path);
  nlohmann::json obj = nlohmann::json::parse(in, nullptr, false);
  if (obj.is_discarded()) throw ValidationError(path + ": JSON parse error");
  std::vector<GtBox> boxes;
  for (const auto& b : obj) {
    if (b.size() == 5) {
      boxes.push_back({b.at(0).get<int>(), b.at(1).get<double>(),
                       b.at(2).get<double>(), b.at(3).get<double>(),
                       b.at(4).get<double>()});
    } else if (b.size() == 4) {
      boxes.push_back({0, b.at(0).get<double>(), b.at(1).get<double>(),
                       b.at(2).get<double>(), b.at(3).get<double>()});
    } else {
      throw ValidationError(path + ": box needs 4 or 5 numbers");
    }
  }
  return boxes;
}

int cmd_heatmap(const HeatmapArgs& args) {
  const AttentionStack stack = read_attention_file(args.attn_path);
  Heatmap heatmap = compose_heatmap(stack, args.temporal_T);
  heatmap.window_id = fs::path(args.attn_path).stem().string();

  std::vector<GtBox> boxes;
  if (!args.boxes_path.empty()) boxes = load_boxes_json(args.boxes_path);

  fs::create_directories(args.out_dir);
  const std::string stem = fs::path(args.attn_path).stem().string();
  write_heatmap_pgm(heatmap, fs::path(args.out_dir) / (stem + ".pgm"));
  write_heatmap_sidecar(heatmap, fs::path(args.out_dir) / (stem + ".json"),
                        boxes.empty() ? nullptr : &boxes);

  std::printf("peak at (row %d, col %d)\n", heatmap.peak_row,
              heatmap.peak_col);
  if (!boxes.empty()) {
    const bool hit = pointing_game(heatmap, boxes);
    std::printf("pointing game: %s\n", hit ? "HIT" : "MISS");
  }
  return kExitOk;
}

struct DistillArgs {
  DistillConfig config;
  std::uint64_t seed = 7;
  int seeds = 1;
  std::string out_dir = ".";
};

int cmd_distill_demo(const DistillArgs& args) {
  fs::create_directories(args.out_dir);
  int kd_wins = 0;
  for (int s = 0; s < args.seeds; ++s) {
    const std::uint64_t seed = args.seed + static_cast<std::uint64_t>(s);
    const KdComparison cmp = run_kd_comparison(seed, args.config);
    if (s == 0) {
      save_distill_log(cmp.kd_log,
                       fs::path(args.out_dir) / "distill_log.jsonl");
    }
    if (cmp.kd.brier < cmp.hard_only.brier) ++kd_wins;
    std::printf(
        "seed %llu  brier kd %.5f vs hard %.5f  ece kd %.5f vs hard %.5f  "
        "teacher-gap %.5f\n",
        static_cast<unsigned long long>(seed), cmp.kd.brier,
        cmp.hard_only.brier, cmp.kd.ece, cmp.hard_only.ece,
        cmp.kd.mean_abs_prob_gap);
  }
  if (args.seeds > 1) {
    std::printf("kd lower brier in %d/%d seeds\n", kd_wins, args.seeds);
  }
  return kExitOk;
}

int cmd_vlm_prob(const std::string& in_path, const std::string& out_path,
                 double fps) {
  const auto traces = scores_from_logits_file(in_path, fps);
  save_traces(traces, out_path);
  std::printf("%zu scores written to %s\n", traces.size(), out_path.c_str());
  return kExitOk;
}

int cmd_mine(const std::string& traces_path, double threshold,
             const std::string& out_path) {
  const auto traces = load_traces(traces_path);
  std::vector<std::string> warnings;
  const auto queue = mine_review_queue(traces, threshold, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  save_queue(queue, out_path);
  std::printf("%zu of %zu traces queued for review at threshold %.2f\n",
              queue.size(), traces.size(), threshold);
  return kExitOk;
}

struct ReportArgs {
  std::string table = "longtail";
  std::vector<std::string> inputs;   // report.json (or rows json) paths
  std::string fixture_path;          // single-window fixture
  std::string compare_path;
  std::string format = "text";
  double threshold = 0.75;
};

int cmd_report(const ReportArgs& args) {
  std::vector<std::pair<std::string, MetricsReport>> reports;
  auto label_for = [](const MetricsReport& r, const fs::path& p) {
    return r.model_name.empty() ? p.stem().string() : r.model_name;
  };
  for (const auto& input : args.inputs) {
    if (args.table == "kaggle" || args.table == "longtail") {
      MetricsReport r = load_report(input);
      reports.emplace_back(label_for(r, input), std::move(r));
    }
  }
  if (!args.fixture_path.empty()) {
    const auto fixture = load_single_window_fixture(args.fixture_path);
    MetricsReport r = evaluate_single_window(fixture, args.threshold);
    reports.emplace_back(label_for(r, args.fixture_path), std::move(r));
  }

  RenderedTable rendered;
  if (!args.compare_path.empty()) {
    if (reports.size() != 1) {
      throw ValidationError("--compare needs exactly one base report");
    }
    MetricsReport other = load_report(args.compare_path);
    rendered = compare_models(reports[0].first, reports[0].second,
                              label_for(other, args.compare_path), other);
  } else if (args.table == "kaggle") {
    if (reports.empty()) throw ValidationError("kaggle table needs input");
    std::vector<TableRow> rows;
    for (const auto& [name, report] : reports) {
      rows.push_back(kaggle_row(name, report));
    }
    rendered = render_table(rows, TableSpec::builtin("kaggle"));
  } else if (args.table == "longtail") {
    if (reports.empty()) throw ValidationError("longtail table needs input");
    if (reports.size() == 1) {
      rendered = render_table(longtail_rows(reports[0].second),
                              TableSpec::builtin("longtail"));
    } else {
      std::vector<std::string> names;
      for (const auto& [name, report] : reports) names.push_back(name);
      rendered = render_table(longtail_comparison_rows(reports),
                              TableSpec::longtail_comparison(names));
    }
  } else {
    // pga / latency / ssl_ablation render from generic row files.
    if (args.inputs.empty()) {
      throw ValidationError("table '" + args.table + "' needs --in rows.json");
    }
    std::vector<TableRow> rows;
    for (const auto& input : args.inputs) {
      for (auto& row : load_rows_json(input)) rows.push_back(std::move(row));
    }
    rendered = render_table(rows, TableSpec::builtin(args.table));
  }

  if (args.format == "text") {
    std::cout << rendered.text;
  } else if (args.format == "csv") {
    std::cout << rendered.csv;
  } else if (args.format == "json") {
    // CSV content as JSON rows for machine consumers.
    nlohmann::json out = nlohmann::json::array();
    std::istringstream csv(rendered.csv);
    std::string header_line;
    std::getline(csv, header_line);
    std::vector<std::string> headers;
    {
      std::istringstream hs(header_line);
      std::string cell;
      while (std::getline(hs, cell, ',')) headers.push_back(cell);
    }
    std::string line;
    while (std::getline(csv, line)) {
      std::istringstream ls(line);
      std::string cell;
      nlohmann::json row = nlohmann::json::object();
      for (size_t i = 0; std::getline(ls, cell, ','); ++i) {
        row[i < headers.size() ? headers[i] : std::to_string(i)] = cell;
      }
      out.push_back(row);
    }
    std::cout << out.dump(2) << "\n";
  } else {
    throw ValidationError("unknown format '" + args.format + "'");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crashbench: collision anticipation evaluation toolkit"};
  app.require_subcommand(1);

  EvaluateArgs eval_args;
  auto* eval = app.add_subcommand("evaluate",
                                  "Evaluate a manifest from traces or a scorer");
  eval->add_option("--manifest", eval_args.manifest_path)->required();
  eval->add_option("--traces", eval_args.traces_path,
                   "traces.jsonl or a directory of <clip_id>.jsonl");
  eval->add_option("--scorer", eval_args.scorer_spec);
  eval->add_option("--model-name", eval_args.model_name);
  eval->add_option("--threshold", eval_args.threshold);
  eval->add_option("--stride", eval_args.stride);
  eval->add_option("--jobs", eval_args.jobs);
  eval->add_option("--seed", eval_args.seed);
  eval->add_option("--out", eval_args.out_dir);

  StreamArgs stream_args;
  auto* stream = app.add_subcommand("stream", "Stream one clip through a scorer");
  stream->add_option("--frames", stream_args.frames_dir,
                     "directory of %06d.ppm frames");
  stream->add_option("--synthetic", stream_args.synthetic_spec,
                     "frames=N,seed=S[,pattern=noise|gradient|constant]");
  stream->add_option("--clip-id", stream_args.clip_id);
  stream->add_option("--scorer", stream_args.scorer_spec);
  stream->add_option("--threshold", stream_args.threshold);
  stream->add_option("--stride", stream_args.stride);
  stream->add_option("--fps", stream_args.fps);
  stream->add_flag("--re-arm", stream_args.re_arm,
                   "allow repeated alerts after the refractory period");
  stream->add_option("--refractory", stream_args.refractory_s);
  stream->add_flag("--subprocess-no-pixels", stream_args.subprocess_no_pixels,
                   "send clip ids instead of pixel payloads");
  stream->add_option("--out", stream_args.out_dir);

  HeatmapArgs heat_args;
  auto* heat = app.add_subcommand("heatmap",
                                  "Compose a heatmap from an attention file");
  heat->add_option("--attn", heat_args.attn_path)->required();
  heat->add_option("--boxes", heat_args.boxes_path);
  heat->add_option("--T", heat_args.temporal_T);
  heat->add_option("--out", heat_args.out_dir);

  DistillArgs distill_args;
  auto* distill =
      app.add_subcommand("distill-demo", "Toy distillation experiment");
  distill->add_option("--seed", distill_args.seed);
  distill->add_option("--seeds", distill_args.seeds,
                      "number of consecutive seeds to run");
  distill->add_option("--tau", distill_args.config.tau);
  distill->add_option("--alpha-hard", distill_args.config.alpha_hard);
  distill->add_option("--alpha-logit", distill_args.config.alpha_logit);
  distill->add_option("--alpha-feat", distill_args.config.alpha_feat);
  distill->add_option("--phase1-steps", distill_args.config.phase1_steps);
  distill->add_option("--total-steps", distill_args.config.total_steps);
  distill->add_option("--out", distill_args.out_dir);

  std::string vlm_in, vlm_out = "vlm_traces.jsonl";
  double vlm_fps = 8.0;
  auto* vlm = app.add_subcommand("vlm-prob",
                                 "Convert answer-token logits to scores");
  vlm->add_option("--in", vlm_in)->required();
  vlm->add_option("--out", vlm_out);
  vlm->add_option("--fps", vlm_fps);

  std::string mine_traces, mine_out = "queue.jsonl";
  double mine_threshold = 0.75;
  auto* mine = app.add_subcommand("mine", "Mine a review queue from traces");
  mine->add_option("--traces", mine_traces)->required();
  mine->add_option("--threshold", mine_threshold);
  mine->add_option("--out", mine_out);

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Render paper-shaped tables");
  report->add_option("--table", report_args.table,
                     "kaggle|longtail|pga|latency|ssl_ablation");
  report->add_option("--in", report_args.inputs)->delimiter(',');
  report->add_option("--fixture", report_args.fixture_path,
                     "single-window fixture json");
  report->add_option("--compare", report_args.compare_path);
  report->add_option("--format", report_args.format, "text|csv|json");
  report->add_option("--threshold", report_args.threshold);

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval->parsed()) return cmd_evaluate(eval_args);
    if (stream->parsed()) return cmd_stream(stream_args);
    if (heat->parsed()) return cmd_heatmap(heat_args);
    if (distill->parsed()) return cmd_distill_demo(distill_args);
    if (vlm->parsed()) return cmd_vlm_prob(vlm_in, vlm_out, vlm_fps);
    if (mine->parsed()) return cmd_mine(mine_traces, mine_threshold, mine_out);
    if (report->parsed()) return cmd_report(report_args);
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
