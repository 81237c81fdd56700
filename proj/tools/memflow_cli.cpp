#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memflow/config.hpp"
#include "memflow/error.hpp"
#include "memflow/harness.hpp"
#include "memflow/memory_store.hpp"
#include "memflow/pipeline.hpp"
#include "memflow/server.hpp"

using namespace memflow;
using nlohmann::json;

namespace {

MemflowService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::MalformedRecord, path + ": invalid JSON");
  return j;
}

struct Common {
  std::string config;
  std::string store;
  std::string backend;
  std::string ablation;
  std::string flavor;
};

AppConfig resolve(const Common& c) {
  AppConfig cfg = c.config.empty() ? AppConfig{} : load_config(c.config);
  std::map<std::string, std::string> cli;
  if (!c.store.empty()) cli["store"] = c.store;
  if (!c.backend.empty()) cli["backend"] = c.backend;
  if (!c.ablation.empty()) cli["ablation"] = c.ablation;
  if (!c.flavor.empty()) cli["flavor"] = c.flavor;
  apply_config(cli, cfg);
  return cfg;
}

std::shared_ptr<LlmGateway> gateway_for(const AppConfig& cfg) {
  if (cfg.backend.empty()) throw Error(Errc::ConfigError, "no backend configured (--backend or backend = ...)");
  return std::make_shared<LlmGateway>(make_backend(cfg.backend, cfg.backend_model, cfg), make_counter(cfg));
}

std::shared_ptr<Pipeline> pipeline_for(const AppConfig& cfg) {
  return std::make_shared<Pipeline>(cfg.pipeline, make_prompts(cfg), make_embedder(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MemFlow memory orchestration engine"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "flat key = value config file");
  app.add_option("--store", common.store, "store file (JSONL)");
  app.add_option("--backend", common.backend, "chat backend: http(s) URL or scripted:<path>");
  app.add_option("--ablation", common.ablation, "comma-separated ablation names");
  app.add_option("--flavor", common.flavor, "chat | document | peer-conversation");

  auto* ingest = app.add_subcommand("ingest", "validate session records and write a store");
  ingest->fallthrough();
  std::string input, label;
  ingest->add_option("--input", input, "JSON array of session records")->required();
  ingest->add_option("--label", label, "source label");

  auto* query = app.add_subcommand("query", "answer one question against a store");
  query->fallthrough();
  std::string question;
  query->add_option("question", question)->required();

  auto* bench = app.add_subcommand("bench", "run a benchmark and write EvalRecords");
  bench->fallthrough();
  std::string bench_path, format = "generic", out_path, summary_path, judge_backend;
  std::size_t workers = 0;
  bench->add_option("--benchmark", bench_path)->required();
  bench->add_option("--format", format, "longmemeval | locomo | longbench | generic");
  bench->add_option("--out", out_path, "EvalRecord JSONL output")->required();
  bench->add_option("--summary", summary_path, "summary JSON output (default: stdout only)");
  bench->add_option("--judge-backend", judge_backend, "accuracy judge: http(s) URL or scripted:<path>");
  bench->add_option("--workers", workers);

  auto* serve = app.add_subcommand("serve", "HTTP service: /ingest, /query, /health");
  serve->fallthrough();
  std::string host;
  int port = 0;
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);

  try {
    AppConfig cfg = resolve(common);

    if (*ingest) {
      if (cfg.store_path.empty()) throw Error(Errc::ConfigError, "--store is required");
      auto store = MemoryStore::from_history(ingest_history(read_json(input), label));
      save_store(store, cfg.store_path);
      std::cout << json{{"sessions", store.history.sessions.size()},
                        {"turns", store.history.turn_count()},
                        {"chunks", chunk_history(store.history, cfg.turns_per_chunk).size()},
                        {"profile_facts", store.profile.facts.size()}}
                       .dump()
                << '\n';
      return 0;
    }

    if (*query) {
      if (cfg.store_path.empty()) throw Error(Errc::ConfigError, "--store is required");
      auto store = load_store(cfg.store_path);
      auto pipeline = pipeline_for(cfg);
      auto index = HybridIndex::build(chunk_history(store.history, cfg.turns_per_chunk), pipeline->embedder());
      auto gateway = gateway_for(cfg);
      std::cout << to_json(pipeline->answer_query(question, &store, &index, *gateway)).dump(2) << '\n';
      return 0;
    }

    if (*bench) {
      auto fmt = parse_bench_format(format);
      auto benchmark = load_benchmark(bench_path, fmt);
      if (common.flavor.empty() && cfg.pipeline.flavor == StoreFlavor::Chat) cfg.pipeline.flavor = benchmark.flavor;
      if (!judge_backend.empty()) cfg.judge_backend = judge_backend;
      auto pipeline = pipeline_for(cfg);
      auto gateway = gateway_for(cfg);
      std::shared_ptr<LlmGateway> judge_gateway;
      if (!cfg.judge_backend.empty())
        judge_gateway = std::make_shared<LlmGateway>(make_backend(cfg.judge_backend, cfg.judge_model, cfg));
      AnswerJudge judge(judge_gateway.get(), make_prompts(cfg));
      BenchOptions opts;
      opts.workers = workers ? workers : cfg.bench_workers;
      opts.turns_per_chunk = cfg.turns_per_chunk;
      auto report = run_bench(benchmark, *pipeline, *gateway, &judge, opts);
      write_records(out_path, report.records);
      report.summary["format"] = to_string(fmt);
      report.summary["backend"] = gateway->backend_label();
      report.summary["judge"] = judge_gateway ? judge_gateway->backend_label() : "overlap-fallback";
      if (!summary_path.empty()) {
        std::ofstream s(summary_path, std::ios::trunc);
        s << report.summary.dump(2) << '\n';
      }
      std::cout << report.summary.dump(2) << '\n';
      return 0;
    }

    if (*serve) {
      auto pipeline = pipeline_for(cfg);
      auto gateway = gateway_for(cfg);
      MemflowService service(pipeline, gateway, cfg.store_path, cfg.turns_per_chunk);
      service.load();
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const std::string h = host.empty() ? cfg.host : host;
      const int p = port ? port : cfg.port;
      std::cerr << "memflow: listening on " << h << ":" << p << '\n';
      if (!service.listen(h, p)) {
        std::cerr << "memflow: cannot bind " << h << ":" << p << '\n';
        return 1;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "memflow: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
