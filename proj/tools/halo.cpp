// Command-line front end: wires config, backends, and retrieval into
// runnable subcommands with reproducible artifacts on disk.

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "halo/halo.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw halo::ConfigError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    std::string trimmed = halo::text::trim_copy(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    lines.push_back(std::move(trimmed));
  }
  return lines;
}

std::string slugify(std::string_view s) {
  std::string out;
  bool pending_dash = false;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (pending_dash && !out.empty()) out.push_back('-');
      out.push_back(halo::text::lower(c));
      pending_dash = false;
    } else {
      pending_dash = true;
    }
  }
  return out.empty() ? "item" : out;
}

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw halo::ConfigError("cannot write file: " + path.string());
  out << content;
}

void write_json_file(const fs::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

// Runs fn(0..n-1) on up to `jobs` threads; the first exception wins.
void run_indexed(std::size_t n, int jobs,
                 const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  int worker_count = std::min<int>(jobs, static_cast<int>(n));
  for (int w = 0; w < worker_count; ++w) {
    workers.emplace_back([&]() {
      while (!stop.load()) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          stop.store(true);
          return;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string join_argv(int argc, char** argv) {
  std::vector<std::string> parts(argv, argv + argc);
  return halo::text::join(parts, " ");
}

struct CommonRun {
  halo::Config config;
  std::unique_ptr<halo::CompletionBackend> backend;
  halo::Retriever retriever;
  halo::PipelineConfig pipeline;
};

CommonRun load_run(const std::string& config_path) {
  CommonRun run;
  run.config = halo::Config::from_file(config_path);
  fs::path base_dir = fs::path(config_path).parent_path();
  run.backend = halo::make_backend(run.config, base_dir);
  run.retriever = halo::make_retriever(run.config, run.backend.get(), base_dir);
  run.pipeline = halo::make_pipeline_config(run.config);
  return run;
}

void finish_manifest(const fs::path& out_dir, const std::string& command,
                     const halo::Config& config,
                     std::vector<std::string> output_paths) {
  halo::RunManifest manifest;
  manifest.command = command;
  manifest.config_digest = config.digest();
  manifest.timestamp = halo::iso8601_timestamp();
  manifest.output_paths = std::move(output_paths);
  halo::write_manifest(out_dir, manifest);
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int cmd_generate(const std::string& topics_path, const std::string& config_path,
                 const std::string& out_dir, int jobs,
                 const std::string& command_line) {
  CommonRun run = load_run(config_path);
  std::vector<std::string> topics = read_lines_file(topics_path);
  if (topics.empty()) throw halo::ConfigError("topic file is empty");

  // resolve file names up front so colliding slugs get distinct suffixes
  std::vector<std::string> names(topics.size());
  std::map<std::string, int> used;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    std::string slug = slugify(topics[i]);
    int count = ++used[slug];
    names[i] = count == 1 ? slug : slug + "-" + std::to_string(count);
  }

  std::vector<std::string> outputs(topics.size());
  run_indexed(topics.size(), jobs, [&](std::size_t i) {
    halo::GenerationReport report = halo::run_article(
        *run.backend, run.retriever, topics[i], run.pipeline);
    fs::path path = fs::path(out_dir) / (names[i] + ".json");
    write_json_file(path, halo::to_json(report));
    outputs[i] = path.string();
  });
  finish_manifest(out_dir, command_line, run.config, outputs);
  return 0;
}

int cmd_multihop(const std::string& questions_path,
                 const std::string& config_path, const std::string& out_dir,
                 int jobs, int step_budget, const std::string& command_line) {
  CommonRun run = load_run(config_path);
  std::vector<std::string> questions = read_lines_file(questions_path);
  if (questions.empty()) throw halo::ConfigError("question file is empty");

  std::vector<std::string> outputs(questions.size());
  run_indexed(questions.size(), jobs, [&](std::size_t i) {
    halo::MultiHopResult result =
        halo::run_multihop(*run.backend, run.retriever, questions[i],
                           run.pipeline, step_budget);
    char name[32];
    std::snprintf(name, sizeof(name), "question-%03zu.json", i + 1);
    fs::path path = fs::path(out_dir) / name;
    write_json_file(path, halo::to_json(result));
    outputs[i] = path.string();
  });
  finish_manifest(out_dir, command_line, run.config, outputs);
  return 0;
}

int cmd_false_premise(const std::string& questions_path,
                      const std::string& config_path,
                      const std::string& out_dir, int jobs,
                      const std::string& command_line) {
  CommonRun run = load_run(config_path);
  std::vector<std::string> questions = read_lines_file(questions_path);
  if (questions.empty()) throw halo::ConfigError("question file is empty");

  std::vector<std::string> outputs(questions.size());
  run_indexed(questions.size(), jobs, [&](std::size_t i) {
    halo::FalsePremiseResult result = halo::run_false_premise(
        *run.backend, run.retriever, questions[i], run.pipeline);
    char name[32];
    std::snprintf(name, sizeof(name), "question-%03zu.json", i + 1);
    fs::path path = fs::path(out_dir) / name;
    write_json_file(path, halo::to_json(result));
    outputs[i] = path.string();
  });
  finish_manifest(out_dir, command_line, run.config, outputs);
  return 0;
}

struct Prediction {
  bool predicted_hallucinated = false;
  std::optional<double> score;
};

int cmd_evaluate(const std::string& annotations_path,
                 const std::string& predictions_path,
                 const std::string& curve_csv, int bins,
                 const std::string& method_name, const std::string& out_dir,
                 const std::string& command_line) {
  auto method = halo::score_method_from_string(method_name);
  if (!method) throw halo::ConfigError("unknown method: " + method_name);

  std::vector<halo::AnnotationRecord> records =
      halo::load_annotations(annotations_path);
  if (records.empty()) throw halo::ConfigError("no annotation records");

  std::map<std::pair<std::string, int>, Prediction> predictions;
  for (const std::string& line : read_lines_file(predictions_path)) {
    nlohmann::json doc = nlohmann::json::parse(line);
    Prediction p;
    p.predicted_hallucinated = doc.at("predicted_hallucinated").get<bool>();
    if (doc.contains("score") && !doc["score"].is_null())
      p.score = doc["score"].get<double>();
    predictions[{doc.at("topic").get<std::string>(),
                 doc.at("sentence_index").get<int>()}] = p;
  }

  std::vector<bool> preds, golds;
  std::vector<double> scores;
  bool all_scored = true;
  for (const halo::AnnotationRecord& rec : records) {
    auto it = predictions.find({rec.topic, rec.sentence_index});
    if (it == predictions.end())
      throw halo::ConfigError("no prediction for topic '" + rec.topic +
                              "' sentence " +
                              std::to_string(rec.sentence_index));
    preds.push_back(it->second.predicted_hallucinated);
    golds.push_back(rec.sentence_label == halo::Label::hallucinated);
    if (it->second.score) scores.push_back(*it->second.score);
    else all_scored = false;
  }

  nlohmann::json out;
  out["detection"] = halo::to_json(halo::detection_metrics(preds, golds));
  out["contingency"] = halo::to_json(halo::contingency(records));

  if (all_scored) {
    std::vector<halo::PrPoint> curve = halo::pr_curve(scores, golds);
    if (!curve.empty()) {
      out["auc"] = halo::auc(curve);
      if (!curve_csv.empty())
        write_text_file(curve_csv, halo::pr_curve_csv(curve));
    }
  }
  try {
    halo::ProbabilityBins pb = halo::probability_bins(records, *method, bins);
    nlohmann::json bins_json;
    auto dump_bins = [](const std::vector<halo::ScoreBin>& side) {
      nlohmann::json arr = nlohmann::json::array();
      for (const halo::ScoreBin& b : side) {
        nlohmann::json item = {{"lo", b.lo},
                               {"hi", b.hi},
                               {"total", b.total},
                               {"hallucinated", b.hallucinated}};
        item["fraction"] =
            b.fraction ? nlohmann::json(*b.fraction) : nlohmann::json(nullptr);
        arr.push_back(std::move(item));
      }
      return arr;
    };
    bins_json["concept"] = dump_bins(pb.concept_bins);
    bins_json["sentence"] = dump_bins(pb.sentence_bins);
    out["probability_bins"] = std::move(bins_json);
  } catch (const halo::NoScoredConcepts&) {
    // annotations without token probabilities: skip the trend analysis
  }

  if (out_dir.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    fs::path path = fs::path(out_dir) / "metrics.json";
    write_json_file(path, out);
    halo::Config effective;
    effective.set("evaluate.annotations", annotations_path);
    effective.set("evaluate.predictions", predictions_path);
    effective.set("evaluate.method", method_name);
    effective.set("evaluate.bins", std::to_string(bins));
    finish_manifest(out_dir, command_line, effective, {path.string()});
  }
  return 0;
}

// Offline scoring over a dump of sentences with token/probability pairs.
int cmd_score(const std::string& input_path, const std::string& method_name,
              const std::string& out_path) {
  auto method = halo::score_method_from_string(method_name);
  if (!method) throw halo::ConfigError("unknown method: " + method_name);

  std::ifstream in(input_path);
  if (!in) throw halo::ConfigError("cannot open dump: " + input_path);
  nlohmann::json doc;
  in >> doc;
  if (!doc.is_array()) throw halo::ConfigError("dump must be a JSON array");

  halo::ScriptedBackend unused;  // rule-based extraction needs no backend
  nlohmann::json out = nlohmann::json::array();
  for (const auto& item : doc) {
    std::string sentence = item.at("sentence").get<std::string>();
    std::vector<halo::TokenLogprob> tokens;
    for (const auto& tok : item.value("tokens", nlohmann::json::array()))
      tokens.push_back({tok.at(0).get<std::string>(), tok.at(1).get<double>()});

    std::vector<halo::Concept> extracted;
    if (item.contains("concepts")) {
      std::vector<std::string> phrases =
          item["concepts"].get<std::vector<std::string>>();
      extracted = halo::concepts_from_phrases(
          sentence, phrases, halo::ConceptSource::external_tool);
    } else {
      extracted = halo::extract_concepts(unused, sentence, "",
                                         halo::ConceptMethod::rule_based);
    }

    std::vector<halo::ConceptScore> scored;
    for (halo::Concept& c : extracted) {
      halo::Concept aligned =
          halo::align_concept_tokens(std::move(c), tokens, sentence);
      scored.push_back(
          halo::make_concept_score(std::move(aligned), tokens, *method));
    }

    nlohmann::json entry;
    entry["sentence"] = sentence;
    nlohmann::json concepts = nlohmann::json::array();
    for (const halo::ConceptScore& cs : scored) concepts.push_back(halo::to_json(cs));
    entry["concepts"] = std::move(concepts);
    std::optional<double> sentence_score = halo::score_sentence(scored);
    entry["sentence_score"] = sentence_score ? nlohmann::json(*sentence_score)
                                             : nlohmann::json(nullptr);
    out.push_back(std::move(entry));
  }

  if (out_path.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    write_json_file(out_path, out);
  }
  return 0;
}

// Re-run a scripted fixture directory; byte-identical inputs give
// byte-identical reports.
int cmd_replay(const std::string& fixture_dir, const std::string& out_dir,
               const std::string& command_line) {
  fs::path fixture(fixture_dir);
  fs::path config_path = fixture / "run.cfg";
  if (!fs::exists(config_path))
    throw halo::ConfigError("fixture has no run.cfg: " + fixture_dir);

  CommonRun run = load_run(config_path.string());
  std::string mode = run.config.get_or("replay.mode", "article");
  std::vector<std::string> outputs;

  if (mode == "article") {
    std::string topic = run.config.require("replay.topic");
    halo::GenerationReport report =
        halo::run_article(*run.backend, run.retriever, topic, run.pipeline);
    fs::path path = fs::path(out_dir) / "report.json";
    write_json_file(path, halo::to_json(report));
    outputs.push_back(path.string());
  } else if (mode == "multihop") {
    std::string question = run.config.require("replay.question");
    int budget = run.config.get_int("multihop.step_budget", 6);
    halo::MultiHopResult result = halo::run_multihop(
        *run.backend, run.retriever, question, run.pipeline, budget);
    fs::path path = fs::path(out_dir) / "report.json";
    write_json_file(path, halo::to_json(result));
    outputs.push_back(path.string());
  } else if (mode == "false_premise") {
    std::string question = run.config.require("replay.question");
    halo::FalsePremiseResult result = halo::run_false_premise(
        *run.backend, run.retriever, question, run.pipeline);
    fs::path path = fs::path(out_dir) / "report.json";
    write_json_file(path, halo::to_json(result));
    outputs.push_back(path.string());
  } else {
    throw halo::ConfigError("unknown replay.mode: " + mode);
  }

  finish_manifest(out_dir, command_line, run.config, outputs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active hallucination detection and mitigation for iterative "
               "LLM text generation"};
  app.require_subcommand(1);
  std::string command_line = join_argv(argc, argv);

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Generate validated articles for a topic file");
  std::string gen_topics, gen_config, gen_out;
  int gen_jobs = 1;
  generate->add_option("--topics", gen_topics, "topic file, one per line")
      ->required();
  generate->add_option("--config", gen_config, "run configuration")->required();
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--jobs", gen_jobs, "parallel topics");

  // multihop
  auto* multihop = app.add_subcommand(
      "multihop", "Answer multi-hop questions step by step");
  std::string mh_questions, mh_config, mh_out;
  int mh_jobs = 1, mh_budget = 6;
  multihop->add_option("--questions", mh_questions, "question file")->required();
  multihop->add_option("--config", mh_config, "run configuration")->required();
  multihop->add_option("--out", mh_out, "output directory")->required();
  multihop->add_option("--jobs", mh_jobs, "parallel questions");
  multihop->add_option("--step-budget", mh_budget, "max reasoning steps");

  // false-premise
  auto* premise = app.add_subcommand(
      "false-premise", "Check, rectify, and answer possibly false-premise "
                       "questions");
  std::string fp_questions, fp_config, fp_out;
  int fp_jobs = 1;
  premise->add_option("--questions", fp_questions, "question file")->required();
  premise->add_option("--config", fp_config, "run configuration")->required();
  premise->add_option("--out", fp_out, "output directory")->required();
  premise->add_option("--jobs", fp_jobs, "parallel questions");

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Detection/mitigation metrics over gold annotations");
  std::string ev_annotations, ev_predictions, ev_curve, ev_method = "min",
              ev_out;
  int ev_bins = 10;
  evaluate->add_option("--annotations", ev_annotations, "gold JSONL")
      ->required();
  evaluate->add_option("--predictions", ev_predictions, "prediction JSONL")
      ->required();
  evaluate->add_option("--curve-csv", ev_curve, "write the PR curve here");
  evaluate->add_option("--bins", ev_bins, "score bins for the trend analysis");
  evaluate->add_option("--method", ev_method, "score method: min|avg|norm_prod");
  evaluate->add_option("--out", ev_out,
                       "output directory (default: metrics to stdout)");

  // score
  auto* score = app.add_subcommand(
      "score", "Offline concept scoring of a token-probability dump");
  std::string sc_input, sc_method = "min", sc_out;
  score->add_option("--input", sc_input, "JSON dump")->required();
  score->add_option("--method", sc_method, "score method: min|avg|norm_prod");
  score->add_option("--out", sc_out, "output file (default stdout)");

  // replay
  auto* replay = app.add_subcommand(
      "replay", "Re-run a scripted fixture directory");
  std::string rp_fixture, rp_out;
  replay->add_option("--fixture", rp_fixture, "fixture directory")->required();
  replay->add_option("--out", rp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << '\n';
    return 1;
  }

  try {
    if (generate->parsed())
      return cmd_generate(gen_topics, gen_config, gen_out, gen_jobs,
                          command_line);
    if (multihop->parsed())
      return cmd_multihop(mh_questions, mh_config, mh_out, mh_jobs, mh_budget,
                          command_line);
    if (premise->parsed())
      return cmd_false_premise(fp_questions, fp_config, fp_out, fp_jobs,
                               command_line);
    if (evaluate->parsed())
      return cmd_evaluate(ev_annotations, ev_predictions, ev_curve, ev_bins,
                          ev_method, ev_out, command_line);
    if (score->parsed()) return cmd_score(sc_input, sc_method, sc_out);
    if (replay->parsed()) return cmd_replay(rp_fixture, rp_out, command_line);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
