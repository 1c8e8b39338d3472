#include "cogen/cli/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "cogen/backends/external_http.hpp"
#include "cogen/backends/ngram_model.hpp"
#include "cogen/backends/table_model.hpp"
#include "cogen/combmodel/comb_model.hpp"
#include "cogen/corpus/corpus.hpp"
#include "cogen/corpus/synthetic.hpp"
#include "cogen/decoder/decoder.hpp"
#include "cogen/report/report.hpp"
#include "cogen/service/audit.hpp"
#include "cogen/service/service.hpp"
#include "json_util.hpp"

namespace cogen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve_path(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() || base.empty() ? q : base / q;
}

void require_file(const fs::path& p, std::string_view what) {
  if (!fs::exists(p)) throw InvalidConfig(std::string(what) + ": '" + p.string() + "' does not exist");
}

BackendEntry parse_backend_entry(const std::string& name, const json& j, const fs::path& base) {
  std::string what = "config backend '" + name + "'";
  detail::require_keys<InvalidConfig>(j, {"kind", "uri"}, {"role", "vocab_ref", "model", "vocab_from", "timeout_ms"},
                                      what);
  BackendEntry e;
  e.descriptor.kind = parse_backend_kind(j.at("kind").get<std::string>());
  if (j.contains("role")) {
    e.descriptor.role = parse_role(j.at("role").get<std::string>());
    e.role_set = true;
  }
  e.descriptor.vocab_ref = j.value("vocab_ref", std::string());
  std::string uri = j.at("uri").get<std::string>();
  if (j.contains("timeout_ms")) e.timeout_ms = j.at("timeout_ms").get<int>();
  if (e.timeout_ms <= 0) throw InvalidConfig(what + ": timeout_ms must be positive");
  bool external = e.descriptor.kind == BackendKind::external_http;
  if ((j.contains("model") || j.contains("vocab_from")) && !external)
    throw InvalidConfig(what + ": model and vocab_from apply to external_http only");
  switch (e.descriptor.kind) {
    case BackendKind::table:
    case BackendKind::ngram:
      e.descriptor.params_uri = resolve_path(base, uri).string();
      require_file(e.descriptor.params_uri, what);
      break;
    case BackendKind::remote:
      parse_host_port(uri);
      e.descriptor.params_uri = uri;
      break;
    case BackendKind::external_http:
      e.descriptor.params_uri = uri;
      e.model = j.value("model", std::string());
      if (j.contains("vocab_from")) {
        e.vocab_from = resolve_path(base, j.at("vocab_from").get<std::string>());
        require_file(e.vocab_from, what);
      }
      break;
  }
  return e;
}

}  // namespace

AppConfig parse_app_config(std::string_view json_text, const fs::path& base_dir) {
  try {
    json j;
    try {
      j = json::parse(json_text);
    } catch (const json::exception& e) {
      throw InvalidConfig(std::string("config: ") + e.what());
    }
    detail::require_keys<InvalidConfig>(j, {}, {"backends", "templates_dir", "sampling", "service", "audit"}, "config");
    AppConfig cfg;
    if (j.contains("backends")) {
      if (!j.at("backends").is_object()) throw InvalidConfig("config: backends must be an object");
      for (const auto& [name, entry] : j.at("backends").items())
        cfg.backends.emplace(name, parse_backend_entry(name, entry, base_dir));
    }
    if (j.contains("templates_dir")) {
      cfg.templates_dir = resolve_path(base_dir, j.at("templates_dir").get<std::string>());
      require_file(cfg.templates_dir, "config templates_dir");
    }
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      detail::require_keys<InvalidConfig>(s, {}, {"temperature", "top_p", "max_new_tokens", "greedy"}, "config sampling");
      cfg.sampling.temperature = s.value("temperature", cfg.sampling.temperature);
      cfg.sampling.top_p = s.value("top_p", cfg.sampling.top_p);
      cfg.sampling.max_new_tokens = s.value("max_new_tokens", cfg.sampling.max_new_tokens);
      cfg.sampling.greedy = s.value("greedy", cfg.sampling.greedy);
      try {
        cfg.sampling.validate();
      } catch (const Error& e) {
        throw InvalidConfig(std::string("config sampling: ") + e.what());
      }
    }
    if (j.contains("service")) {
      const auto& s = j.at("service");
      detail::require_keys<InvalidConfig>(s, {}, {"address"}, "config service");
      cfg.service_address = s.value("address", std::string());
      if (!cfg.service_address.empty()) parse_host_port(cfg.service_address);
    }
    cfg.audit = j.value("audit", false);
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  } catch (const InvalidConfig&) {
    throw;
  } catch (const Error& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
}

AppConfig load_app_config(const fs::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const LoadError& e) {
    throw InvalidConfig(e.what());
  }
  return parse_app_config(text, path.parent_path());
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const InvalidConfig*>(&e) || dynamic_cast<const TemplateError*>(&e)) return kExitUsage;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return kExitTransport;
  if (auto* s = dynamic_cast<const SessionError*>(&e)) return s->transport() ? kExitTransport : kExitData;
  return kExitData;
}

namespace {

// Every failure is reported against the stage that was running.
struct Run {
  std::ostream& out;
  std::ostream& err;
  std::string stage = "startup";
  void at(std::string name) { stage = std::move(name); }
};

template <class T>
T parse_number(const std::string& text, std::string_view what) {
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size())
    throw InvalidConfig(std::string(what) + ": '" + text + "' is not a number");
  return value;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::istringstream in(detail::read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> non_blank(std::vector<std::string> lines) {
  std::erase_if(lines, [](const std::string& l) { return l.find_first_not_of(" \t") == std::string::npos; });
  return lines;
}

void emit(Run& run, const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    run.out << text;
  else
    detail::write_file(out_path, text);
}

bool ci_mode() {
  const char* ci = std::getenv("CI");
  return ci && *ci;
}

void require_seed(const CLI::Option* seed) {
  if (ci_mode() && seed->count() == 0) throw InvalidConfig("--seed is required when CI is set");
}

BackendKind detect_model_kind(const fs::path& path) {
  auto j = detail::parse_json(detail::read_file(path), path.string());
  if (j.is_object() && j.contains("format") && j.at("format").is_string()) {
    auto format = j.at("format").get<std::string>();
    if (format == "cogen-ngram") return BackendKind::ngram;
    if (format == "cogen-table") return BackendKind::table;
  }
  throw LoadError("'" + path.string() + "' is not a cogen model file");
}

// A backend name from the config, or else a model file path.
BackendEntry entry_for(const AppConfig& cfg, const std::string& spec) {
  if (auto it = cfg.backends.find(spec); it != cfg.backends.end()) return it->second;
  BackendEntry e;
  e.descriptor.params_uri = spec;
  e.descriptor.kind = detect_model_kind(spec);
  return e;
}

std::shared_ptr<const LanguageModel> local_model(const BackendEntry& e, Role role) {
  if (e.role_set && e.descriptor.role != role)
    throw InvalidConfig("backend '" + e.descriptor.params_uri + "' is declared " +
                        std::string(to_string(e.descriptor.role)) + " but used as " + std::string(to_string(role)));
  if (e.descriptor.kind == BackendKind::remote || e.descriptor.kind == BackendKind::external_http)
    throw InvalidConfig("backend '" + e.descriptor.params_uri + "' is " + std::string(to_string(e.descriptor.kind)) +
                        " and has no local copy");
  auto d = e.descriptor;
  d.role = role;
  return load_backend(d);
}

std::shared_ptr<const LanguageModel> large_model(const BackendEntry& e, const Vocab* fallback_vocab, Run& run) {
  if (e.descriptor.kind != BackendKind::external_http) return local_model(e, Role::large_cloud);
  std::optional<Vocab> vocab;
  if (!e.vocab_from.empty())
    vocab = local_model(entry_for({}, e.vocab_from.string()), Role::small_device)->vocab();
  else if (fallback_vocab)
    vocab = *fallback_vocab;
  else
    throw InvalidConfig("external_http backend '" + e.descriptor.params_uri + "' needs vocab_from");
  ExternalHttpConfig c;
  c.base_url = e.descriptor.params_uri;
  c.model = e.model;
  c.timeout = std::chrono::milliseconds(e.timeout_ms);
  auto* err = &run.err;
  return std::make_shared<ExternalHttpModel>(*vocab, c, [err](const std::string& w) { *err << "warning: " << w << "\n"; });
}

struct CloudSpec {
  std::string llm;
  std::string remote;
  int timeout_ms = 10000;
  std::string session = "cli";
};

std::unique_ptr<CloudModel> make_cloud(const AppConfig& cfg, const CloudSpec& spec, const Vocab& local_vocab, Run& run) {
  if (!spec.remote.empty()) {
    parse_host_port(spec.remote);
    return std::make_unique<RemoteCloudModel>(spec.remote, local_vocab, RemoteOptions{spec.session, spec.timeout_ms});
  }
  if (spec.llm.empty()) throw InvalidConfig("this mode needs --llm or --remote");
  auto e = entry_for(cfg, spec.llm);
  if (e.descriptor.kind == BackendKind::remote)
    return std::make_unique<RemoteCloudModel>(e.descriptor.params_uri, local_vocab,
                                              RemoteOptions{spec.session, e.timeout_ms});
  return std::make_unique<LocalCloudModel>(large_model(e, &local_vocab, run), spec.session);
}

const TemplateSet& templates_for(const AppConfig& cfg, const std::string& flag, std::optional<TemplateSet>& storage) {
  if (!flag.empty()) return storage.emplace(TemplateSet::load(flag));
  if (!cfg.templates_dir.empty()) return storage.emplace(TemplateSet::load(cfg.templates_dir));
  return TemplateSet::defaults();
}

FusionStrategy parse_strategy_args(const std::vector<std::string>& args) {
  if (args.empty()) return FusionStrategy::mean();
  const auto& name = args[0];
  auto arity = [&](std::size_t n) {
    if (args.size() != n) throw InvalidConfig("--strategy " + name + " takes " + std::to_string(n - 1) + " argument(s)");
  };
  if (name == "mean") return arity(1), FusionStrategy::mean();
  if (name == "max") return arity(1), FusionStrategy::max();
  if (name == "fixed") return arity(2), FusionStrategy::fixed(parse_number<double>(args[1], "--strategy fixed"));
  if (name == "learnable") return arity(2), FusionStrategy::learnable(args[1]);
  throw InvalidConfig("unknown strategy '" + name + "'");
}

DecodeMode parse_mode_args(const std::vector<std::string>& args, const FusionStrategy& strategy) {
  const auto& name = args.at(0);
  auto arity = [&](std::size_t n) {
    if (args.size() != n) throw InvalidConfig("--mode " + name + " takes " + std::to_string(n - 1) + " argument(s)");
  };
  DecodeMode mode;
  if (name == "slm") arity(1), mode = DecodeMode::slm_only();
  else if (name == "llm-ctx") arity(1), mode = DecodeMode::llm_only_with_context();
  else if (name == "llm-noctx") arity(1), mode = DecodeMode::llm_only_no_context();
  else if (name == "fuse") arity(1), mode = DecodeMode::logit_fusion(strategy);
  else if (name == "first-k") arity(2), mode = DecodeMode::first_k(parse_number<std::size_t>(args[1], "--mode first-k"), strategy);
  else if (name == "sketch") arity(1), mode = DecodeMode::sketch_then_fill(FillConditioning::sketch);
  else if (name == "sketch-full") arity(1), mode = DecodeMode::sketch_then_fill(FillConditioning::full_content);
  else throw InvalidConfig("unknown mode '" + name + "'");
  mode.validate();
  return mode;
}

const CorpusRecord& pick_record(const std::vector<CorpusRecord>& records, std::size_t index) {
  if (index >= records.size())
    throw InvalidInput("record " + std::to_string(index) + " out of range (corpus has " +
                       std::to_string(records.size()) + ")");
  return records[index];
}

void report_audit(Run& run, const AuditVerdict& verdict) {
  if (verdict.pass) {
    run.err << "audit: pass (" << verdict.requests_checked << " requests)\n";
    return;
  }
  for (const auto& f : verdict.findings)
    run.err << "audit: request " << f.request_index << " leaks " << f.field << " at offset " << f.offset << ": \""
            << f.excerpt << "\"\n";
  throw PrivacyViolation("cloud payloads contain private context (" + std::to_string(verdict.findings.size()) +
                         " finding(s))");
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---- subcommands ----

struct GlobalOpts {
  std::string config;
  AppConfig load(Run& run) const {
    run.at("config");
    return config.empty() ? AppConfig{} : load_app_config(config);
  }
};

struct ServeOpts {
  std::string backend, listen, log, port_file;
  bool debug_payloads = false;
};

int run_serve(Run& run, const GlobalOpts& g, const ServeOpts& o) {
  auto cfg = g.load(run);
  run.at("load backend");
  auto model = large_model(entry_for(cfg, o.backend), nullptr, run);
  ServerConfig sc;
  sc.listen = "127.0.0.1:0";
  if (!cfg.service_address.empty()) sc.listen = cfg.service_address;
  if (const char* env = std::getenv("COGEN_LISTEN"); env && *env) sc.listen = env;
  if (!o.listen.empty()) sc.listen = o.listen;
  sc.debug_payloads = o.debug_payloads;
  sc.log_path = o.log;

  run.at("listen");
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  LogitServer server(model, sc);
  server.start();
  if (!o.port_file.empty()) detail::write_file(o.port_file, std::to_string(server.port()) + "\n");
  run.out << "listening on " << server.address() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  run.err << "served " << server.log().size() << " requests on " << server.connections_served() << " connections\n";
  return kExitOk;
}

struct GenerateOpts {
  std::string corpus, slm, templates, trace_out, on_failure = "abort";
  CloudSpec cloud;
  std::size_t record = 0;
  std::vector<std::string> mode{"fuse"};
  std::vector<std::string> strategy;
  std::uint64_t seed = 0;
  double temperature = 0.7, top_p = 0.9;
  std::uint32_t max_new_tokens = 1024;
  bool greedy = false, audit = false;
  CLI::Option *seed_opt = nullptr, *temperature_opt = nullptr, *top_p_opt = nullptr, *max_opt = nullptr,
              *greedy_opt = nullptr;
};

int run_generate(Run& run, const GlobalOpts& g, const GenerateOpts& o) {
  auto cfg = g.load(run);
  run.at("arguments");
  require_seed(o.seed_opt);
  auto strategy = parse_strategy_args(o.strategy);
  auto mode = parse_mode_args(o.mode, strategy);
  DecodeOptions options;
  options.on_failure = parse_failure_policy(o.on_failure);
  SamplingConfig sampling = cfg.sampling;
  sampling.seed = o.seed;
  if (o.temperature_opt->count()) sampling.temperature = o.temperature;
  if (o.top_p_opt->count()) sampling.top_p = o.top_p;
  if (o.max_opt->count()) sampling.max_new_tokens = o.max_new_tokens;
  if (o.greedy_opt->count()) sampling.greedy = o.greedy;
  sampling.validate();

  run.at("load corpus");
  auto records = load_corpus(o.corpus);
  const auto& record = pick_record(records, o.record);

  run.at("load templates");
  std::optional<TemplateSet> template_storage;
  const auto& templates = templates_for(cfg, o.templates, template_storage);

  run.at("load slm");
  auto slm = local_model(entry_for(cfg, o.slm), Role::small_device);

  std::optional<CombModelParams> comb;
  if (mode.uses_fusion() && mode.strategy.kind == FusionStrategy::Kind::learnable) {
    run.at("load combmodel");
    comb = comb_load(mode.strategy.model_ref);
  }

  std::shared_ptr<const LanguageModel> private_llm;
  std::unique_ptr<CloudModel> cloud;
  auto log = std::make_shared<RequestLog>();
  if (mode.kind == DecodeMode::Kind::llm_only_with_context) {
    run.at("load llm");
    if (o.cloud.llm.empty()) throw InvalidConfig("llm-ctx needs --llm naming a local model");
    private_llm = local_model(entry_for(cfg, o.cloud.llm), Role::small_device);
  } else if (mode.kind != DecodeMode::Kind::slm_only) {
    run.at("connect llm");
    CloudSpec spec = o.cloud;
    if (spec.llm.empty() && spec.remote.empty()) spec.remote = cfg.service_address;
    cloud = make_cloud(cfg, spec, slm->vocab(), run);
    cloud->set_request_log(log);
  }

  GenerationSession session;
  session.record = &record;
  session.mode = mode;
  session.sampling = sampling;
  session.slm = slm.get();
  session.llm = cloud.get();
  session.comb = comb ? &*comb : nullptr;
  session.llm_with_context = private_llm.get();
  session.templates = &templates;
  session.options = options;

  run.at("decode");
  DecodeResult result;
  try {
    result = decode(session);
  } catch (const SessionError& e) {
    if (!o.trace_out.empty()) detail::write_file(o.trace_out, write_trace(e.partial_trace(), slm->vocab()));
    throw;
  }
  for (const auto& ev : result.trace.events) run.err << "event at step " << ev.step << ": " << ev.message << "\n";
  run.out << slm->vocab().decode(result.tokens) << "\n";

  if (!o.trace_out.empty()) {
    run.at("write trace");
    detail::write_file(o.trace_out, write_trace(result.trace, slm->vocab()));
  }
  if (o.audit || cfg.audit) {
    run.at("audit");
    report_audit(run, privacy_audit(log->payloads(), record.context()));
  }
  return kExitOk;
}

struct TrainCombOpts {
  std::string train, val, slm, out, templates;
  CloudSpec cloud;
  std::uint64_t seed = 0;
  std::size_t epochs = 100, batch = 2, patience = 5;
  double lr = 2e-3;
  CLI::Option* seed_opt = nullptr;
};

int run_train_comb(Run& run, const GlobalOpts& g, const TrainCombOpts& o) {
  auto cfg = g.load(run);
  run.at("arguments");
  require_seed(o.seed_opt);
  CombTrainConfig tc;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.max_epochs = o.epochs;
  tc.patience = o.patience;
  tc.seed = o.seed;
  tc.validate();

  run.at("load corpus");
  auto train = load_corpus(o.train);
  auto val = load_corpus(o.val);
  run.at("load templates");
  std::optional<TemplateSet> template_storage;
  const auto& templates = templates_for(cfg, o.templates, template_storage);
  run.at("load slm");
  auto slm = local_model(entry_for(cfg, o.slm), Role::small_device);
  run.at("connect llm");
  CloudSpec spec = o.cloud;
  if (spec.llm.empty() && spec.remote.empty()) spec.remote = cfg.service_address;
  auto cloud = make_cloud(cfg, spec, slm->vocab(), run);

  run.at("build examples");
  auto examples = [&](const std::vector<CorpusRecord>& records) {
    std::vector<CombExample> all;
    for (const auto& r : records) {
      auto ex = comb_examples(ScoreInputs{&r, slm.get(), cloud.get(), nullptr, &templates, {}});
      all.insert(all.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
    }
    return all;
  };
  auto train_ex = examples(train);
  auto val_ex = examples(val);
  if (train_ex.empty() || val_ex.empty()) throw InvalidInput("no training or validation examples");

  run.at("train");
  auto [params, report] = comb_train(train_ex, val_ex, tc);
  run.out << "epoch\ttrain_loss\tval_loss\timproved\n";
  for (const auto& e : report.epochs)
    run.out << e.epoch << "\t" << fmt4(e.train_loss) << "\t" << fmt4(e.val_loss) << "\t" << (e.improved ? "yes" : "no")
            << "\n";
  run.out << "best epoch " << report.best_epoch << " val_loss " << fmt4(report.best_val_loss) << " ("
          << report.stop_reason << ")\n";
  if (report.degenerate_train) run.err << "warning: " << report.degenerate_train << " degenerate training examples\n";

  run.at("write model");
  comb_save(params, o.out);
  return kExitOk;
}

struct TrainNgramOpts {
  std::string text, out, policy = "whitespace";
  std::vector<std::string> vocab_text, vocab_corpus;
  unsigned order = 2;
  double alpha = 1.0, context_weight = 0.0, concentration = 2.0;
};

int run_train_ngram(Run& run, const TrainNgramOpts& o) {
  run.at("read text");
  auto lines = non_blank(read_lines(o.text));
  auto vocab_texts = lines;
  for (const auto& f : o.vocab_text)
    for (auto& l : non_blank(read_lines(f))) vocab_texts.push_back(std::move(l));
  for (const auto& f : o.vocab_corpus)
    for (const auto& r : load_corpus(f)) {
      vocab_texts.push_back(r.profile);
      vocab_texts.insert(vocab_texts.end(), r.history.begin(), r.history.end());
      vocab_texts.push_back(r.task);
      vocab_texts.push_back(r.general_task);
      vocab_texts.push_back(r.reference);
    }
  run.at("train");
  auto vocab = Vocab::build(vocab_texts, parse_tokenizer_policy(o.policy));
  NGramModel::Options opts{o.order, o.alpha, o.context_weight, o.concentration};
  auto model = NGramModel::train(lines, opts, vocab);
  run.at("write model");
  model.save(o.out);
  run.out << "vocab " << vocab.size() << " hash " << hex64(vocab.hash()) << "\n";
  return kExitOk;
}

struct CorpusOpts {
  std::string corpus, out, rejected, kind, train_out, val_out, dev, test, policy = "whitespace", label = "Dataset",
                                                                          general_out;
  std::uint64_t seed = 0;
  SyntheticCorpusConfig synth;
  std::size_t general_sentences = 3000;
  CLI::Option* seed_opt = nullptr;
};

int run_corpus_validate(Run& run, const CorpusOpts& o) {
  run.at("load corpus");
  auto records = load_corpus(o.corpus);
  run.out << "ok " << records.size() << " records\n";
  return kExitOk;
}

int run_corpus_filter(Run& run, const CorpusOpts& o) {
  run.at("load corpus");
  auto records = load_corpus(o.corpus);
  run.at("filter");
  auto [kept, rejected] = filter_lamp(records, parse_dataset_kind(o.kind));
  run.at("write corpus");
  save_corpus(kept, o.out);
  if (!o.rejected.empty()) {
    std::string text;
    for (const auto& r : rejected)
      text += r.record.user_id + "\t" + r.reason + "\t" + std::to_string(r.length) + "\n";
    detail::write_file(o.rejected, text);
  }
  run.out << "kept " << kept.size() << " rejected " << rejected.size() << "\n";
  return kExitOk;
}

int run_corpus_split(Run& run, const CorpusOpts& o) {
  run.at("arguments");
  require_seed(o.seed_opt);
  run.at("load corpus");
  auto records = load_corpus(o.corpus);
  run.at("split");
  auto [train, val] = split_train_val(std::move(records), o.seed);
  run.at("write corpus");
  save_corpus(train, o.train_out);
  save_corpus(val, o.val_out);
  run.out << "train " << train.size() << " val " << val.size() << "\n";
  return kExitOk;
}

int run_corpus_stats(Run& run, const CorpusOpts& o) {
  run.at("load corpus");
  auto train = load_corpus(o.corpus);
  auto policy = parse_tokenizer_policy(o.policy);
  CorpusStats stats;
  if (o.dev.empty() && o.test.empty()) {
    stats = corpus_stats(train, policy);
  } else {
    auto dev = o.dev.empty() ? std::vector<CorpusRecord>{} : load_corpus(o.dev);
    auto test = o.test.empty() ? std::vector<CorpusRecord>{} : load_corpus(o.test);
    stats = corpus_stats(train, dev, test, policy);
  }
  run.out << render_corpus_stats(stats, o.label);
  return kExitOk;
}

int run_corpus_verbs(Run& run, const CorpusOpts& o) {
  run.at("load corpus");
  auto records = load_corpus(o.corpus);
  run.out << render_verb_stats(task_verb_stats(records));
  return kExitOk;
}

int run_corpus_synth(Run& run, const CorpusOpts& o) {
  run.at("arguments");
  require_seed(o.seed_opt);
  auto cfg = o.synth;
  cfg.seed = o.seed;
  run.at("generate");
  auto records = synthetic_corpus(cfg);
  run.at("write corpus");
  save_corpus(records, o.out);
  if (!o.general_out.empty()) {
    std::string text;
    for (const auto& s : synthetic_general_text(o.general_sentences, o.seed + 100, cfg.entity_pool)) text += s + "\n";
    detail::write_file(o.general_out, text);
  }
  run.out << "wrote " << records.size() << " records\n";
  return kExitOk;
}

struct EvalOpts {
  std::string candidates, references, scores, judgments, policy = "whitespace";
  bool curve = false;
};

int run_eval_metrics(Run& run, const EvalOpts& o) {
  run.at("read inputs");
  auto cands = read_lines(o.candidates);
  auto refs = read_lines(o.references);
  if (cands.size() != refs.size())
    throw InvalidInput("candidates have " + std::to_string(cands.size()) + " lines but references " +
                       std::to_string(refs.size()));
  if (cands.empty()) throw InvalidInput("no candidates");
  run.at("score");
  auto policy = parse_tokenizer_policy(o.policy);
  MetricScore sum;
  run.out << "item\tbleu\trouge_l_p\trouge_l_r\trouge_l_f\n";
  for (std::size_t i = 0; i < cands.size(); ++i) {
    auto s = score_text(cands[i], refs[i], policy);
    sum.bleu += s.bleu;
    sum.rouge_l_p += s.rouge_l_p;
    sum.rouge_l_r += s.rouge_l_r;
    sum.rouge_l_f += s.rouge_l_f;
    run.out << i << "\t" << fmt4(s.bleu) << "\t" << fmt4(s.rouge_l_p) << "\t" << fmt4(s.rouge_l_r) << "\t"
            << fmt4(s.rouge_l_f) << "\n";
  }
  double n = static_cast<double>(cands.size());
  run.out << "mean\t" << fmt4(sum.bleu / n) << "\t" << fmt4(sum.rouge_l_p / n) << "\t" << fmt4(sum.rouge_l_r / n)
          << "\t" << fmt4(sum.rouge_l_f / n) << "\n";
  return kExitOk;
}

int run_eval_aggregate(Run& run, const EvalOpts& o) {
  run.at("read scores");
  auto text = detail::read_file(o.scores);
  run.at("aggregate");
  auto agg = aggregate_scores(text);
  if (agg.rejected) run.err << "aggregate: rejected " << agg.rejected << " rows\n";
  run.out << (o.curve ? render_stability_curve(agg) : render_score_grid(agg));
  return kExitOk;
}

int run_eval_wtl(Run& run, const EvalOpts& o) {
  run.at("read judgments");
  auto outcomes = parse_judgments(detail::read_file(o.judgments));
  run.at("tally");
  auto wtl = win_tie_lose(outcomes);
  run.out << "win/tie/lose\t" << wtl.counts_cell() << "\n";
  run.out << "percent\t" << wtl.percent_cell() << "\n";
  return kExitOk;
}

struct VisualizeOpts {
  std::string trace, format = "html", out, title = "Weight trace";
  bool swap_hues = false;
};

int run_visualize(Run& run, const VisualizeOpts& o) {
  run.at("read trace");
  auto loaded = read_trace(detail::read_file(o.trace));
  run.at("render");
  TraceRenderOptions ro;
  ro.swap_hues = o.swap_hues;
  ro.title = o.title;
  auto text = render_weight_trace(loaded.trace, loaded.tokens, parse_trace_format(o.format), ro);
  run.at("write output");
  emit(run, o.out, text);
  return kExitOk;
}

void add_cloud_flags(CLI::App* cmd, CloudSpec& c) {
  cmd->add_option("--llm", c.llm, "Large model: config backend name or model file");
  cmd->add_option("--remote", c.remote, "Logit service address host:port");
  cmd->add_option("--timeout-ms", c.timeout_ms, "Remote request timeout in milliseconds")->check(CLI::PositiveNumber);
  cmd->add_option("--session", c.session, "Session label sent to the logit service");
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collaborative text generation with a private small model and a context-blind large model", "cogen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cogen 1.0");
  GlobalOpts g;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);

  ServeOpts serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a large model over the logit protocol");
  serve_cmd->add_option("--backend", serve.backend, "Config backend name or model file")->required();
  serve_cmd->add_option("--listen", serve.listen, "host:port to listen on (env COGEN_LISTEN)");
  serve_cmd->add_option("--log", serve.log, "Request log file (JSON lines)");
  serve_cmd->add_flag("--debug-payloads", serve.debug_payloads, "Keep request payloads in the log");
  serve_cmd->add_option("--port-file", serve.port_file, "Write the bound port to this file");

  GenerateOpts gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate a response for one corpus record");
  gen_cmd->add_option("--corpus", gen.corpus, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--record", gen.record, "Zero-based record index");
  gen_cmd->add_option("--slm", gen.slm, "Small model: config backend name or model file")->required();
  add_cloud_flags(gen_cmd, gen.cloud);
  gen_cmd->add_option("--mode", gen.mode, "slm | llm-ctx | llm-noctx | fuse | first-k N | sketch | sketch-full")
      ->expected(1, 2);
  gen_cmd->add_option("--strategy", gen.strategy, "fixed W | mean | max | learnable PATH")->expected(1, 2);
  gen.seed_opt = gen_cmd->add_option("--seed", gen.seed, "Sampling seed");
  gen.temperature_opt = gen_cmd->add_option("--temperature", gen.temperature, "Sampling temperature");
  gen.top_p_opt = gen_cmd->add_option("--top-p", gen.top_p, "Nucleus mass");
  gen.max_opt = gen_cmd->add_option("--max-new-tokens", gen.max_new_tokens, "Token budget");
  gen.greedy_opt = gen_cmd->add_flag("--greedy", gen.greedy, "Argmax decoding");
  gen_cmd->add_option("--templates", gen.templates, "Template directory")->check(CLI::ExistingDirectory);
  gen_cmd->add_option("--trace-out", gen.trace_out, "Write the weight trace here");
  gen_cmd->add_option("--on-failure", gen.on_failure, "abort | degrade");
  gen_cmd->add_flag("--audit", gen.audit, "Audit cloud payloads for private context");

  TrainCombOpts tc;
  auto* tc_cmd = app.add_subcommand("train-comb", "Train the fusion-weight network");
  tc_cmd->add_option("--train", tc.train, "Training corpus JSONL")->required()->check(CLI::ExistingFile);
  tc_cmd->add_option("--val", tc.val, "Validation corpus JSONL")->required()->check(CLI::ExistingFile);
  tc_cmd->add_option("--slm", tc.slm, "Small model: config backend name or model file")->required();
  add_cloud_flags(tc_cmd, tc.cloud);
  tc_cmd->add_option("--out", tc.out, "Output model file")->required();
  tc.seed_opt = tc_cmd->add_option("--seed", tc.seed, "Initialization and shuffle seed");
  tc_cmd->add_option("--epochs", tc.epochs, "Maximum epochs");
  tc_cmd->add_option("--lr", tc.lr, "Learning rate");
  tc_cmd->add_option("--batch", tc.batch, "Batch size");
  tc_cmd->add_option("--patience", tc.patience, "Epochs without improvement before stopping");
  tc_cmd->add_option("--templates", tc.templates, "Template directory")->check(CLI::ExistingDirectory);

  TrainNgramOpts tn;
  auto* tn_cmd = app.add_subcommand("train-ngram", "Train an n-gram backend");
  tn_cmd->add_option("--text", tn.text, "Training text, one item per line")->required()->check(CLI::ExistingFile);
  tn_cmd->add_option("--vocab-text", tn.vocab_text, "Extra text files for the vocabulary")->check(CLI::ExistingFile);
  tn_cmd->add_option("--vocab-corpus", tn.vocab_corpus, "Corpus files for the vocabulary")->check(CLI::ExistingFile);
  tn_cmd->add_option("--order", tn.order, "n-gram order")->check(CLI::PositiveNumber);
  tn_cmd->add_option("--alpha", tn.alpha, "Add-alpha smoothing");
  tn_cmd->add_option("--context-weight", tn.context_weight, "Context cache weight");
  tn_cmd->add_option("--concentration", tn.concentration, "Context cache concentration");
  tn_cmd->add_option("--policy", tn.policy, "whitespace | character");
  tn_cmd->add_option("--out", tn.out, "Output model file")->required();

  CorpusOpts co;
  auto* corpus_cmd = app.add_subcommand("corpus", "Corpus tools");
  corpus_cmd->require_subcommand(1);
  auto* validate_cmd = corpus_cmd->add_subcommand("validate", "Check a corpus file against the schema");
  validate_cmd->add_option("--corpus", co.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  auto* filter_cmd = corpus_cmd->add_subcommand("filter", "Apply the reference length filter");
  filter_cmd->add_option("--corpus", co.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  filter_cmd->add_option("--kind", co.kind, "email | paper")->required();
  filter_cmd->add_option("--out", co.out, "Kept records")->required();
  filter_cmd->add_option("--rejected", co.rejected, "Rejected records with reasons");
  auto* split_cmd = corpus_cmd->add_subcommand("split", "Seeded 9:1 train/validation split");
  split_cmd->add_option("--corpus", co.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  co.seed_opt = split_cmd->add_option("--seed", co.seed, "Shuffle seed");
  split_cmd->add_option("--train-out", co.train_out, "Training records")->required();
  split_cmd->add_option("--val-out", co.val_out, "Validation records")->required();
  auto* stats_cmd = corpus_cmd->add_subcommand("stats", "Corpus statistics table");
  stats_cmd->add_option("--corpus", co.corpus, "Corpus JSONL (training part)")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--dev", co.dev, "Development part")->check(CLI::ExistingFile);
  stats_cmd->add_option("--test", co.test, "Test part")->check(CLI::ExistingFile);
  stats_cmd->add_option("--policy", co.policy, "whitespace | character");
  stats_cmd->add_option("--label", co.label, "Column label");
  auto* verbs_cmd = corpus_cmd->add_subcommand("verbs", "Top task verbs and objects");
  verbs_cmd->add_option("--corpus", co.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  auto* synth_cmd = corpus_cmd->add_subcommand("synth", "Write a synthetic personalized corpus");
  auto* synth_seed = synth_cmd->add_option("--seed", co.seed, "Generator seed");
  synth_cmd->add_option("--users", co.synth.users, "Number of users")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--tasks", co.synth.tasks_per_user, "Tasks per user")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--history", co.synth.history_items, "History items per user");
  synth_cmd->add_option("--out", co.out, "Corpus JSONL")->required();
  synth_cmd->add_option("--general-out", co.general_out, "General-domain text, one sentence per line");
  synth_cmd->add_option("--general-sentences", co.general_sentences, "Sentences of general text");

  EvalOpts eo;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluation tools");
  eval_cmd->require_subcommand(1);
  auto* metrics_cmd = eval_cmd->add_subcommand("metrics", "BLEU and ROUGE-L per line");
  metrics_cmd->add_option("--candidates", eo.candidates, "Candidate texts, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  metrics_cmd->add_option("--references", eo.references, "Reference texts, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  metrics_cmd->add_option("--policy", eo.policy, "whitespace | character");
  auto* agg_cmd = eval_cmd->add_subcommand("aggregate", "Mean judge ratings per setting");
  agg_cmd->add_option("--scores", eo.scores, "Score rows (TSV)")->required()->check(CLI::ExistingFile);
  agg_cmd->add_flag("--curve", eo.curve, "Print running means instead of the grid");
  auto* wtl_cmd = eval_cmd->add_subcommand("wtl", "Win/tie/lose tally");
  wtl_cmd->add_option("--judgments", eo.judgments, "Judgment rows (TSV)")->required()->check(CLI::ExistingFile);

  VisualizeOpts vo;
  auto* vis_cmd = app.add_subcommand("visualize", "Render a weight trace");
  vis_cmd->add_option("--trace", vo.trace, "Trace file")->required()->check(CLI::ExistingFile);
  vis_cmd->add_option("--format", vo.format, "html | ansi");
  vis_cmd->add_flag("--swap-hues", vo.swap_hues, "Exchange the SLM and LLM hues");
  vis_cmd->add_option("--title", vo.title, "Title line");
  vis_cmd->add_option("--out", vo.out, "Output file (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Run run{out, err};
  try {
    if (!g.config.empty()) g.load(run);
    if (*serve_cmd) return run_serve(run, g, serve);
    if (*gen_cmd) return run_generate(run, g, gen);
    if (*tc_cmd) return run_train_comb(run, g, tc);
    if (*tn_cmd) return run_train_ngram(run, tn);
    if (*validate_cmd) return run_corpus_validate(run, co);
    if (*filter_cmd) return run_corpus_filter(run, co);
    if (*split_cmd) return run_corpus_split(run, co);
    if (*stats_cmd) return run_corpus_stats(run, co);
    if (*verbs_cmd) return run_corpus_verbs(run, co);
    if (*synth_cmd) {
      co.seed_opt = synth_seed;
      return run_corpus_synth(run, co);
    }
    if (*metrics_cmd) return run_eval_metrics(run, eo);
    if (*agg_cmd) return run_eval_aggregate(run, eo);
    if (*wtl_cmd) return run_eval_wtl(run, eo);
    if (*vis_cmd) return run_visualize(run, vo);
  } catch (const std::exception& e) {
    err << "cogen: " << run.stage << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace cogen
