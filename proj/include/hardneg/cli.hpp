#pragma once

#include <algorithm>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hardneg/corpus.hpp"
#include "hardneg/curator.hpp"
#include "hardneg/generator.hpp"
#include "hardneg/http_transport.hpp"
#include "hardneg/keyword_miner.hpp"
#include "hardneg/log.hpp"
#include "hardneg/metrics.hpp"
#include "hardneg/run_config.hpp"
#include "hardneg/scoring.hpp"
#include "hardneg/verifier.hpp"
#include "hardneg/version.hpp"

namespace hardneg::cli {

namespace fs = std::filesystem;

/// Streams and hooks a command runs against. Tests substitute all of them.
struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  /// Builds the chat backend for generate/verify.
  std::function<std::shared_ptr<llm::ChatBackend>(const llm::BackendConfig&)> backend_factory =
      llm::make_backend;
};

namespace detail {

// ---------------------------------------------------------------------------
// Shared helpers

/// UTC time as ISO 8601. Honors SOURCE_DATE_EPOCH so reruns can be
/// byte-identical.
inline std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e) {
    char* end = nullptr;
    const long long v = std::strtoll(e, &end, 10);
    if (*end != '\0' || v < 0) throw ConfigError("SOURCE_DATE_EPOCH must be a non-negative integer");
    t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline fs::path out_dir(const Settings& s) {
  auto p = s.path("out");
  fs::create_directories(p);
  return p;
}

inline bool is_inside(const fs::path& p, const fs::path& dir) {
  const auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(dir));
  return !rel.empty() && *rel.begin() != "..";
}

/// Manifest entry for an input file: where it was and what it contained.
/// Files inside the run directory are recorded relative to it.
inline Json describe_input(const fs::path& p, const fs::path& run_dir) {
  Json j;
  if (is_inside(p, run_dir)) {
    j["path"] = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(run_dir)).generic_string();
    j["base"] = "run";
  } else {
    j["path"] = p.generic_string();
    j["base"] = "cwd";
  }
  j["sha256"] = sha256_hex(read_file(p));
  return j;
}

inline fs::path resolve_input(const Json& entry, const fs::path& run_dir) {
  const auto where = std::string("manifest input");
  fs::path p = require_string(entry, "path", where);
  if (require_string(entry, "base", where) == "run") p = run_dir / p;
  if (!fs::exists(p)) throw ConfigError("recorded input is missing: " + p.string());
  const auto expected = require_string(entry, "sha256", where);
  if (sha256_hex(read_file(p)) != expected)
    throw DataError("recorded input changed since the run: " + p.string());
  return p;
}

struct DatasetInput {
  corpus::IntentDataset dataset;
  Json manifest;
};

inline DatasetInput load_dataset_input(const fs::path& path, const std::string& format,
                                       const std::vector<std::string>& exclude,
                                       const fs::path& run_dir) {
  DatasetInput d;
  d.dataset = corpus::exclude_intents(corpus::load_dataset(path, corpus::parse_format(format)),
                                      exclude);
  d.manifest = describe_input(path, run_dir);
  d.manifest["format"] = format;
  d.manifest["exclude_intents"] = exclude;
  d.manifest["name"] = d.dataset.name;
  return d;
}

inline DatasetInput load_dataset_input(const Settings& s, const fs::path& run_dir) {
  return load_dataset_input(s.input("dataset"), s.str("format"), s.list("exclude-intents"),
                            run_dir);
}

/// Training ids: the split file's train list restricted to ids still in the
/// dataset, or every id when no split is given.
inline std::vector<std::string> train_ids(const corpus::IntentDataset& ds,
                                          const std::optional<fs::path>& split) {
  if (!split) return ds.ids();
  Json j;
  try {
    j = Json::parse(read_file(*split));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(split->string() + ": invalid JSON (" + e.what() + ")");
  }
  const auto sp = corpus::split_from_json(j);
  const std::set<std::string> keep(sp.train.begin(), sp.train.end());
  std::vector<std::string> out;
  for (const auto& u : ds.utterances)
    if (keep.contains(u.id)) out.push_back(u.id);
  if (out.empty()) throw DataError(split->string() + ": no training ids match the dataset");
  return out;
}

inline llm::BackendConfig backend_config(const Settings& s) {
  llm::BackendConfig c;
  c.kind = llm::parse_backend_kind(s.str("backend"));
  if (c.kind == llm::BackendConfig::Kind::kHttp) {
    c.endpoint = s.str("endpoint");
    c.model = s.str("model");
  } else {
    c.script = s.input("script").string();
  }
  c.api_key_env = s.str("api-key-env");
  c.timeout = std::chrono::milliseconds(s.integer("timeout-ms"));
  c.max_retries = static_cast<int>(s.integer("max-retries"));
  c.retry_backoff = std::chrono::milliseconds(s.integer("retry-backoff-ms"));
  const auto conc = s.integer("max-concurrency");
  if (conc < 1) throw ConfigError("'max-concurrency' must be >= 1");
  c.max_concurrency = static_cast<size_t>(conc);
  c.requests_per_second = s.number("requests-per-second");
  c.generation_temperature = s.number("generation-temperature");
  c.verification_temperature = s.number("verification-temperature");
  c.validate();
  return c;
}

inline PromptTemplates load_prompts(const Settings& s) {
  const auto p = s.optional_input("prompts");
  if (!p) return {};
  try {
    return PromptTemplates::from_json(Json::parse(read_file(*p)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(p->string() + ": invalid JSON (" + e.what() + ")");
  }
}

inline Json prompts_to_json(const PromptTemplates& p) {
  Json j;
  j["generation_system"] = p.generation_system;
  j["seed_intent"] = p.seed_intent;
  j["generate"] = p.generate;
  j["generate_retry"] = p.generate_retry;
  j["step1_system"] = p.step1_system;
  j["step1_question"] = p.step1_question;
  j["step2_system"] = p.step2_system;
  j["step2_question"] = p.step2_question;
  j["verdict_retry"] = p.verdict_retry;
  return j;
}

inline size_t jobs(const Settings& s) {
  const auto j = s.integer("jobs");
  if (j < 1) throw ConfigError("'jobs' must be >= 1");
  return static_cast<size_t>(j);
}

inline Json parse_json_file(const fs::path& p) {
  try {
    return Json::parse(read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(p.string() + ": invalid JSON (" + e.what() + ")");
  }
}

inline void write_transcript(const fs::path& dir, const std::string& conversation_id,
                             std::span<const llm::ChatMessage> messages) {
  write_file_atomic(dir / (sanitize_file_component(conversation_id) + ".jsonl"),
                    llm::transcript_jsonl(messages));
}

inline std::map<Status, size_t> status_counts(const std::vector<GenerationRecord>& rs) {
  std::map<Status, size_t> c;
  for (const auto& r : rs) ++c[r.status];
  return c;
}

inline Json status_counts_json(const std::vector<GenerationRecord>& rs) {
  Json j = Json::object();
  for (const auto& [k, v] : kStatusNames) {
    size_t n = 0;
    for (const auto& r : rs) n += r.status == k;
    if (n) j[std::string(v)] = n;
  }
  return j;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateJob {
  DatasetInput dataset;
  std::vector<std::string> train;
  Json split_manifest;  // null when no split file
  std::vector<keywords::KeywordProfile> profiles;
  Json profiles_manifest;
  generation::GenerationParams params;
  PromptTemplates prompts;
  uint64_t seed = 13;
  llm::BackendConfig backend;
  size_t jobs = 1;
};

inline Json generate_fingerprint(const GenerateJob& job) {
  Json j;
  j["dataset_sha256"] = job.dataset.manifest["sha256"];
  j["format"] = job.dataset.manifest["format"];
  j["exclude_intents"] = job.dataset.manifest["exclude_intents"];
  j["split_sha256"] = job.split_manifest.is_null() ? Json() : job.split_manifest["sha256"];
  j["profiles_sha256"] = job.profiles_manifest["sha256"];
  j["params"] = job.params.to_json();
  j["prompts"] = prompts_to_json(job.prompts);
  j["seed"] = job.seed;
  j["backend"] = job.backend.to_json();
  return j;
}

/// Runs generation into `out`. Intents already present in
/// generate.checkpoint.jsonl (from an interrupted run with the same
/// configuration) are not asked again.
inline std::vector<GenerationRecord> run_generate(const GenerateJob& job, llm::Gateway& gateway,
                                                  const fs::path& out, std::ostream& msg) {
  const auto started = timestamp();
  const auto fingerprint = generate_fingerprint(job);
  const auto config_hash = sha256_hex(fingerprint.dump());
  const auto transcripts = out / "transcripts";
  fs::create_directories(transcripts);

  // intent -> records from an earlier, interrupted run
  std::map<std::string, std::vector<GenerationRecord>> done;
  const auto ckpt_path = out / "generate.checkpoint.jsonl";
  if (fs::exists(ckpt_path)) {
    const auto text = read_file(ckpt_path);
    bool dropped = false;
    const auto body = without_truncated_tail(text, dropped);
    bool first = true;
    for_each_jsonl(body, ckpt_path.string(), [&](const Json& j, size_t line) {
      const auto where = ckpt_path.string() + ":" + std::to_string(line);
      if (first) {
        first = false;
        if (!j.contains("config_hash") || j["config_hash"] != config_hash)
          throw ConfigError(ckpt_path.string() +
                            " belongs to a different configuration; remove it or choose "
                            "another --out");
        return;
      }
      auto& rs = done[require_string(j, "intent", where)];
      for (const auto& r : j.at("records")) rs.push_back(record_from_json(r, where));
    });
    if (!done.empty())
      msg << "resuming: " << done.size() << " intent(s) already generated\n";
  }

  std::vector<keywords::KeywordProfile> todo;
  for (const auto& p : job.profiles)
    if (!done.contains(p.intent)) todo.push_back(p);

  std::ofstream ckpt;
  auto open_ckpt = [&] {
    const bool fresh = !fs::exists(ckpt_path) || done.empty();
    ckpt.open(ckpt_path, fresh ? std::ios::trunc | std::ios::binary
                               : std::ios::app | std::ios::binary);
    if (!ckpt) throw IoError("cannot write " + ckpt_path.string());
    if (fresh) {
      Json h;
      h["config_hash"] = config_hash;
      ckpt << h.dump() << '\n' << std::flush;
    }
  };
  auto checkpoint_line = [](const std::string& intent, const std::vector<GenerationRecord>& rs) {
    Json j;
    j["intent"] = intent;
    j["records"] = Json::array();
    for (const auto& r : rs) j["records"].push_back(record_to_json(r));
    return j.dump();
  };
  open_ckpt();

  generation::GenerateRequest req{&job.dataset.dataset, job.train,  job.params,
                                  job.prompts,          job.seed,   job.backend.generation_temperature};
  size_t finished = 0;
  auto runs = generation::generate_all(req, todo, gateway, job.jobs,
                                       [&](const generation::IntentRun& run) {
    if (run.transcript.size() > 1) write_transcript(transcripts, run.conversation_id, run.transcript);
    const auto& intent = run.records.empty() ? std::string() : run.records.front().intent;
    if (!intent.empty()) ckpt << checkpoint_line(intent, run.records) << '\n' << std::flush;
    ++finished;
  });
  ckpt.close();
  for (size_t i = 0; i < todo.size(); ++i) done[todo[i].intent] = std::move(runs[i].records);

  std::vector<GenerationRecord> records;
  std::string ckpt_text;
  {
    Json h;
    h["config_hash"] = config_hash;
    ckpt_text = h.dump() + "\n";
  }
  for (const auto& p : job.profiles) {
    auto& rs = done[p.intent];
    if (!rs.empty()) ckpt_text += checkpoint_line(p.intent, rs) + "\n";
    records.insert(records.end(), rs.begin(), rs.end());
  }
  write_file_atomic(ckpt_path, ckpt_text);
  write_file_atomic(out / "records.jsonl", records_to_jsonl(records));

  Json m;
  m["tool"] = "hardneg";
  m["version"] = kVersion;
  m["command"] = "generate";
  m["seed"] = job.seed;
  m["dataset"] = job.dataset.manifest;
  m["split"] = job.split_manifest;
  m["profiles"] = job.profiles_manifest;
  m["params"] = job.params.to_json();
  m["backend"] = job.backend.to_json();
  m["prompts"] = prompts_to_json(job.prompts);
  m["config_hash"] = config_hash;
  m["counts"] = status_counts_json(records);
  m["records"] = records.size();
  m["started_at"] = started;
  m["finished_at"] = timestamp();
  write_file_atomic(out / "manifest.json", m.dump(2) + "\n");

  const auto counts = status_counts(records);
  auto count = [&](Status s) { return counts.contains(s) ? counts.at(s) : 0; };
  msg << "generate: " << records.size() << " candidate(s) for " << job.profiles.size()
      << " intent(s): " << count(Status::kGenerated) << " generated, "
      << count(Status::kFailedContainment) << " failed containment, " << count(Status::kFailed)
      << " failed\n";
  if (count(Status::kFailed))
    log::warn(std::to_string(count(Status::kFailed)) + " candidate(s) failed at the gateway");
  return records;
}

inline int cmd_generate(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  GenerateJob job;
  job.dataset = load_dataset_input(s, out);
  const auto split = s.optional_input("split");
  job.train = train_ids(job.dataset.dataset, split);
  if (split) job.split_manifest = describe_input(*split, out);
  const auto profiles_path = s.input_or("profiles", out / "profiles.jsonl");
  job.profiles = keywords::parse_profiles(read_file(profiles_path), profiles_path.string());
  job.profiles_manifest = describe_input(profiles_path, out);
  job.params.n = s.count("n");
  job.params.m = s.count("m");
  job.params.x = s.count("x");
  job.params.samples_per_intent = s.count("samples-per-intent");
  job.params.validate();
  job.prompts = load_prompts(s);
  job.seed = static_cast<uint64_t>(s.integer("seed"));
  job.backend = backend_config(s);
  job.jobs = jobs(s);
  llm::Gateway gateway(job.backend, io.backend_factory(job.backend));
  run_generate(job, gateway, out, io.out);
  return 0;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyJob {
  std::vector<GenerationRecord> records;
  Json records_manifest;
  DatasetInput dataset;
  PromptTemplates prompts;
  llm::BackendConfig backend;
  size_t jobs = 1;
};

inline void run_verify(VerifyJob& job, llm::Gateway& gateway, const fs::path& out,
                       std::ostream& msg) {
  const auto started = timestamp();
  const auto transcripts = out / "transcripts";
  fs::create_directories(transcripts);
  const auto ckpt_path = out / "verify.checkpoint.jsonl";

  auto& records = job.records;
  if (fs::exists(ckpt_path)) {
    const auto text = read_file(ckpt_path);
    bool dropped = false;
    std::map<std::string, GenerationRecord> decided;
    for (auto& r : parse_records(without_truncated_tail(text, dropped), ckpt_path.string()))
      decided[r.id] = std::move(r);
    size_t resumed = 0;
    for (auto& r : records) {
      auto it = decided.find(r.id);
      if (it == decided.end()) continue;
      if (it->second.text != r.text || it->second.intent != r.intent)
        throw ConfigError(ckpt_path.string() + " does not match the input records (record '" +
                          r.id + "'); remove it or choose another --out");
      if (reachable(r.status, it->second.status)) {
        r = it->second;
        ++resumed;
      }
    }
    if (resumed) msg << "resuming: " << resumed << " record(s) already decided\n";
  }

  std::ofstream ckpt(ckpt_path, std::ios::app | std::ios::binary);
  if (!ckpt) throw IoError("cannot write " + ckpt_path.string());
  verification::VerifyRequest req;
  req.all_intents = job.dataset.dataset.intents;
  req.prompts = job.prompts;
  req.temperature = job.backend.verification_temperature;
  req.jobs = job.jobs;
  req.transcript_sink = [&](const llm::Conversation& c) {
    write_transcript(transcripts, c.id(), c.messages());
  };
  req.on_decided = [&](const GenerationRecord& r) {
    ckpt << record_to_json(r).dump() << '\n' << std::flush;
  };
  verification::verify_all(records, gateway, req);
  ckpt.close();

  std::string ckpt_text;
  std::vector<std::string> pending;
  for (const auto& r : records) {
    if (!r.verdicts.empty() && funnel_depth(r.status) >= 0 && r.status != Status::kGenerated)
      ckpt_text += record_to_json(r).dump() + "\n";
    if (!r.error.empty()) pending.push_back(r.id);
  }
  write_file_atomic(ckpt_path, ckpt_text);
  write_file_atomic(out / "verified.jsonl", records_to_jsonl(records));
  write_file_atomic(out / "verdicts.jsonl", verification::verdict_log_jsonl(records));

  Json m;
  m["tool"] = "hardneg";
  m["version"] = kVersion;
  m["command"] = "verify";
  m["records"] = job.records_manifest;
  m["dataset"] = job.dataset.manifest;
  m["intents"] = job.dataset.dataset.intents.size();
  m["backend"] = job.backend.to_json();
  m["prompts"] = prompts_to_json(job.prompts);
  m["counts"] = status_counts_json(records);
  m["started_at"] = started;
  m["finished_at"] = timestamp();
  write_file_atomic(out / "verify.manifest.json", m.dump(2) + "\n");

  size_t s1 = 0, s2 = 0, gen = 0;
  for (const auto& r : records) {
    gen += funnel_depth(r.status) >= 0;
    s1 += funnel_depth(r.status) >= 1;
    s2 += funnel_depth(r.status) >= 2;
  }
  msg << "verify: " << gen << " candidate(s), " << s1 << " passed step 1, " << s2
      << " passed step 2\n";
  if (!pending.empty())
    throw IncompleteError(std::to_string(pending.size()) +
                              " record(s) still pending after gateway errors (first: " +
                              pending.front() + "); re-run verify to resume",
                          pending);
}

inline int cmd_verify(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  VerifyJob job;
  const auto records_path = s.input_or("records", out / "records.jsonl");
  job.records = parse_records(read_file(records_path), records_path.string());
  job.records_manifest = describe_input(records_path, out);
  job.dataset = load_dataset_input(s, out);
  job.prompts = load_prompts(s);
  job.backend = backend_config(s);
  job.jobs = jobs(s);
  llm::Gateway gateway(job.backend, io.backend_factory(job.backend));
  run_verify(job, gateway, out, io.out);
  return 0;
}

// ---------------------------------------------------------------------------
// mine, review, assemble, split

inline int cmd_mine(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  const auto ds = load_dataset_input(s, out).dataset;
  const auto train = train_ids(ds, s.optional_input("split"));
  const auto profiles = keywords::mine_keywords(ds, train, s.count("n"));
  const auto path = out / "profiles.jsonl";
  write_file_atomic(path, keywords::profiles_to_jsonl(profiles));
  io.out << "mine: " << profiles.size() << " keyword profile(s) written to " << path.string()
         << "\n";
  return 0;
}

inline int cmd_review(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  const auto records_path = s.input_or("records", out / "verified.jsonl");
  const auto records = parse_records(read_file(records_path), records_path.string());
  const auto ds = load_dataset_input(s, out).dataset;
  const auto train = train_ids(ds, s.optional_input("split"));
  const std::unordered_set<std::string> train_set(train.begin(), train.end());
  const auto seed = static_cast<uint64_t>(s.integer("seed"));
  std::map<std::string, std::vector<std::string>> context;
  for (const auto& r : records)
    if (!context.contains(r.intent))
      context[r.intent] = generation::sample_intent_examples(
          ds, train_set, r.intent, s.count("samples-per-intent"), seed);
  std::string reviewer;
  if (s.has("reviewer")) {
    reviewer = s.str("reviewer");
  } else if (const char* u = std::getenv("USER"); u && *u) {
    reviewer = u;
  } else {
    reviewer = "reviewer";
  }
  const auto decisions_path = s.has("decisions") ? s.path("decisions") : out / "decisions.jsonl";
  curation::DecisionStore store(decisions_path);
  const auto outcome = curation::review_session(records, context, store, reviewer, io.in, io.out);
  io.out << "\nreview: " << outcome.recorded.size() << " decision(s) recorded in "
         << decisions_path.string() << (outcome.quit ? " (session paused)" : "") << "\n";
  return 0;
}

inline curation::FunnelReport funnel_from_json(const Json& j, const std::string& where) {
  auto one = [&](const Json& r) {
    curation::FunnelStats s;
    try {
      s.dataset = r.at("dataset").get<std::string>();
      s.total_prompted = r.at("total_prompted").get<uint64_t>();
      s.generated = r.at("generated").get<uint64_t>();
      s.after_step1 = r.at("after_step1").get<uint64_t>();
      s.after_step2 = r.at("after_step2").get<uint64_t>();
      s.final_count = r.at("final").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    return s;
  };
  curation::FunnelReport rep;
  if (!j.contains("datasets") || !j.contains("overall"))
    throw ParseError(where + ": expected 'datasets' and 'overall'");
  for (const auto& r : j["datasets"]) rep.rows.push_back(one(r));
  rep.overall = one(j["overall"]);
  return rep;
}

inline int cmd_assemble(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  const auto records_path = s.input_or("records", out / "verified.jsonl");
  const auto records = parse_records(read_file(records_path), records_path.string());
  const auto decisions_path = s.has("decisions") ? s.path("decisions") : out / "decisions.jsonl";
  std::vector<curation::ReviewDecision> decisions;
  if (fs::exists(decisions_path))
    decisions = curation::DecisionStore(decisions_path).decisions();
  else if (s.explicitly_set("decisions"))
    throw ConfigError("'decisions' refers to a missing file: " + decisions_path.string());
  curation::AssembleOptions opts;
  opts.quorum = s.count("quorum");
  opts.auto_accept = s.flag("auto-accept");
  opts.name = s.str("name");
  if (sanitize_file_component(opts.name) != opts.name)
    throw ConfigError("'name' must be usable as a file name: " + opts.name);
  const auto asm_ = curation::assemble_dataset(records, decisions, opts);
  corpus::write_dataset(asm_.dataset, out / (opts.name + ".jsonl"));
  write_file_atomic(out / "provenance.jsonl", curation::provenance_jsonl(asm_.provenance));
  write_file_atomic(out / "final_records.jsonl", records_to_jsonl(asm_.records));
  const auto funnel = curation::funnel_report(asm_.records, decisions, opts.quorum);
  write_file_atomic(out / "funnel.txt", curation::funnel_table(funnel));
  write_file_atomic(out / "funnel.json", curation::funnel_json(funnel).dump(2) + "\n");
  io.out << "assemble: " << asm_.dataset.utterances.size() << " utterance(s) in "
         << (out / (opts.name + ".jsonl")).string() << "\n"
         << curation::funnel_table(funnel);
  return 0;
}

inline int cmd_split(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  const auto input = load_dataset_input(s, out);
  const auto& ds = input.dataset;
  const auto sp = corpus::split_dataset(ds.ids(), s.number("fraction"),
                                        static_cast<uint64_t>(s.integer("seed")));
  const auto stem = ds.name;
  auto j = corpus::split_to_json(sp);
  write_file_atomic(out / (stem + ".split.json"), j.dump(2) + "\n");
  corpus::write_dataset(corpus::subset(ds, sp.train), out / (stem + ".train.jsonl"));
  corpus::write_dataset(corpus::subset(ds, sp.test), out / (stem + ".test.jsonl"));
  io.out << "split: " << stem << " -> " << sp.train.size() << " train, " << sp.test.size()
         << " test\n";
  return 0;
}

// ---------------------------------------------------------------------------
// score, eval, report

inline int cmd_score(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  const auto path = s.input("predictions");
  const auto preds = scoring::parse_predictions(read_file(path), path.string());
  scoring::ScoringParams params;
  params.function = scoring::parse_score_function(s.str("score-function"));
  params.temperature = s.number("temperature");
  const auto scored = scoring::score_predictions(preds, params);
  const auto dst = out / ("scores." + std::string(scoring::to_string(params.function)) + ".jsonl");
  write_file_atomic(dst, scoring::scores_to_jsonl(scored));
  io.out << "score: " << scored.size() << " prediction(s) scored with "
         << scoring::to_string(params.function) << " -> " << dst.string() << "\n";
  return 0;
}

inline int cmd_eval(const Settings& s, Io& io) {
  const auto out = out_dir(s);
  const auto path = s.input("predictions");
  const auto preds = scoring::parse_predictions(read_file(path), path.string());
  metrics::ReportMeta meta;
  meta.dataset = s.has("eval-dataset") ? s.str("eval-dataset") : path.stem().string();
  meta.target_tpr = s.number("target-tpr");
  if (s.has("thresholds")) {
    meta.thresholds.clear();
    for (const auto& t : s.list("thresholds")) {
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (*end != '\0' || !std::isfinite(v))
        throw ConfigError("'thresholds' entry is not a number: " + t);
      meta.thresholds.push_back(v);
    }
    for (size_t i = 1; i < meta.thresholds.size(); ++i)
      if (!(meta.thresholds[i] > meta.thresholds[i - 1]))
        throw ConfigError("'thresholds' must be strictly increasing");
    if (meta.thresholds.empty()) throw ConfigError("'thresholds' must not be empty");
  }
  if (!(meta.target_tpr > 0 && meta.target_tpr <= 1))
    throw ConfigError("'target-tpr' must be in (0, 1]");

  std::vector<metrics::EvalReport> fresh;
  for (auto fn : {scoring::ScoreFunction::kSoftmax, scoring::ScoreFunction::kEnergy}) {
    scoring::ScoringParams params{fn, s.number("temperature")};
    meta.function = fn;
    for (auto& r : metrics::reports_for(scoring::score_predictions(preds, params), meta))
      fresh.push_back(std::move(r));
  }

  // eval.json accumulates cells across datasets; this run replaces its own.
  const auto eval_path = out / "eval.json";
  std::vector<metrics::EvalReport> all;
  if (fs::exists(eval_path)) {
    const auto j = parse_json_file(eval_path);
    if (!j.contains("reports") || !j["reports"].is_array())
      throw ParseError(eval_path.string() + ": expected a 'reports' array");
    for (const auto& r : j["reports"]) {
      auto rep = metrics::report_from_json(r, eval_path.string());
      if (rep.dataset != meta.dataset) all.push_back(std::move(rep));
    }
  }
  all.insert(all.end(), fresh.begin(), fresh.end());
  Json j;
  j["reports"] = Json::array();
  for (const auto& r : all) j["reports"].push_back(metrics::report_to_json(r));
  write_file_atomic(eval_path, j.dump(2) + "\n");
  write_file_atomic(out / "eval.txt", metrics::report_table(all));
  for (const auto& r : fresh)
    write_file_atomic(out / "sweeps" /
                          (sanitize_file_component(r.dataset) + "." +
                           std::string(scoring::to_string(r.function)) + "." +
                           std::string(metrics::to_string(r.oos_set)) + ".csv"),
                      metrics::sweep_csv(r));
  io.out << metrics::report_table(fresh);
  return 0;
}

inline int cmd_report(const Settings& s, Io& io) {
  const auto out = s.path("out");
  if (!fs::is_directory(out)) throw ConfigError("'out' is not a directory: " + out.string());
  std::string text;
  if (fs::exists(out / "funnel.json")) {
    const auto rep =
        funnel_from_json(parse_json_file(out / "funnel.json"), (out / "funnel.json").string());
    text += "Generation funnel\n\n" + curation::funnel_table(rep) + "\n";
  }
  std::vector<fs::path> splits;
  for (const auto& e : fs::directory_iterator(out)) {
    const auto name = e.path().filename().string();
    if (name.size() > 11 && name.ends_with(".split.json")) splits.push_back(e.path());
  }
  std::sort(splits.begin(), splits.end());
  if (!splits.empty()) {
    text += "Splits\n\n";
    for (const auto& p : splits) {
      const auto sp = corpus::split_from_json(parse_json_file(p));
      const auto name = p.filename().string();
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-30s  train %6zu  test %6zu  seed %llu  fraction %.2f\n",
                    name.substr(0, name.size() - 11).c_str(), sp.train.size(), sp.test.size(),
                    static_cast<unsigned long long>(sp.seed), sp.fraction);
      text += buf;
    }
    text += "\n";
  }
  if (fs::exists(out / "eval.json")) {
    const auto j = parse_json_file(out / "eval.json");
    std::vector<metrics::EvalReport> reps;
    for (const auto& r : j.at("reports"))
      reps.push_back(metrics::report_from_json(r, (out / "eval.json").string()));
    text += "OOS detection\n\n" + metrics::report_table(reps) + "\n";
  }
  if (text.empty())
    throw DataError("nothing to report in " + out.string() +
                    " (expected funnel.json, *.split.json or eval.json)");
  write_file_atomic(out / "report.txt", text);
  io.out << text;
  return 0;
}

// ---------------------------------------------------------------------------
// replay

inline std::vector<llm::MockEntry> script_from_run(const fs::path& transcripts) {
  std::vector<fs::path> files;
  if (fs::is_directory(transcripts))
    for (const auto& e : fs::directory_iterator(transcripts))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<llm::MockEntry> script;
  for (const auto& f : files) {
    const auto msgs = llm::parse_transcript(read_file(f), f.string());
    auto part = llm::script_from_transcript(f.stem().string(), msgs);
    script.insert(script.end(), part.begin(), part.end());
  }
  return script;
}

inline int cmd_replay(const Settings& s, Io& io) {
  const auto run = s.input("run");
  const auto out = out_dir(s);
  if (fs::weakly_canonical(run) == fs::weakly_canonical(out))
    throw ConfigError("'out' must differ from 'run'");
  const auto manifest_path = run / "manifest.json";
  if (!fs::exists(manifest_path))
    throw ConfigError(run.string() + " has no manifest.json from a generate run");
  const auto m = parse_json_file(manifest_path);

  auto script = script_from_run(run / "transcripts");
  llm::BackendConfig mock;
  mock.kind = llm::BackendConfig::Kind::kMock;
  mock.script = (run / "transcripts").generic_string();
  try {
    mock.generation_temperature = m.at("backend").at("generation_temperature").get<double>();
    mock.verification_temperature = m.at("backend").at("verification_temperature").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  llm::Gateway gateway(mock, std::make_shared<llm::MockBackend>(std::move(script)));

  GenerateJob job;
  try {
    const auto& d = m.at("dataset");
    job.dataset = load_dataset_input(resolve_input(d, run), d.at("format").get<std::string>(),
                                     d.at("exclude_intents").get<std::vector<std::string>>(), out);
    std::optional<fs::path> split;
    if (!m.at("split").is_null()) split = resolve_input(m["split"], run);
    job.train = train_ids(job.dataset.dataset, split);
    if (split) job.split_manifest = describe_input(*split, out);
    const auto profiles = resolve_input(m.at("profiles"), run);
    job.profiles = keywords::parse_profiles(read_file(profiles), profiles.string());
    job.profiles_manifest = describe_input(profiles, out);
    const auto& p = m.at("params");
    job.params.n = p.at("n").get<size_t>();
    job.params.m = p.at("m").get<size_t>();
    job.params.x = p.at("x").get<size_t>();
    job.params.samples_per_intent = p.at("samples_per_intent").get<size_t>();
    job.prompts = PromptTemplates::from_json(m.at("prompts"));
    job.seed = m.at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  job.backend = mock;
  job.jobs = 1;
  // The original run's checkpoint would make this a no-op; replay starts clean.
  fs::remove(out / "generate.checkpoint.jsonl");
  fs::remove(out / "verify.checkpoint.jsonl");
  const auto records = run_generate(job, gateway, out, io.out);

  std::vector<std::string> compared, diverged;
  auto compare = [&](const std::string& name) {
    compared.push_back(name);
    if (read_file(run / name) != read_file(out / name)) diverged.push_back(name);
  };
  compare("records.jsonl");

  if (fs::exists(run / "verify.manifest.json") && fs::exists(run / "verified.jsonl")) {
    const auto vm = parse_json_file(run / "verify.manifest.json");
    VerifyJob vjob;
    vjob.records = records;
    vjob.records_manifest = describe_input(out / "records.jsonl", out);
    try {
      const auto& d = vm.at("dataset");
      vjob.dataset = load_dataset_input(resolve_input(d, run), d.at("format").get<std::string>(),
                                        d.at("exclude_intents").get<std::vector<std::string>>(),
                                        out);
      vjob.prompts = PromptTemplates::from_json(vm.at("prompts"));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError((run / "verify.manifest.json").string() + ": " + e.what());
    }
    vjob.backend = mock;
    vjob.jobs = 1;
    try {
      run_verify(vjob, gateway, out, io.out);
    } catch (const IncompleteError&) {
      // Pending records are compared below like everything else.
    }
    compare("verified.jsonl");
    compare("verdicts.jsonl");
  }

  if (!diverged.empty())
    throw DataError("replay diverged from the recorded run: " + join(diverged, ", "));
  io.out << "replay: identical " << join(compared, ", ") << "\n";
  return 0;
}

inline std::string_view kind_label(ErrorKind k) {
  switch (k) {
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIntegrity: return "integrity error";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kTransport: return "transport error";
    case ErrorKind::kApi: return "API error";
    case ErrorKind::kScript: return "mock script error";
    case ErrorKind::kIncomplete: return "incomplete";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

inline std::string_view describe_command(std::string_view c) {
  if (c == "mine") return "Mine per-intent keyword profiles";
  if (c == "generate") return "Generate hard-negative candidates with a chat backend";
  if (c == "verify") return "Run the two-step OOS verification";
  if (c == "review") return "Review verified candidates interactively (a/r/u/q)";
  if (c == "assemble") return "Assemble the accepted utterances and the funnel report";
  if (c == "split") return "Write a seeded train/test split";
  if (c == "score") return "Score a prediction file";
  if (c == "eval") return "Compute AUROC, AUPR, FPR95 and the F1 sweep";
  if (c == "report") return "Summarize funnel, splits and evaluation results";
  if (c == "replay") return "Re-run a recorded generate/verify run from its transcripts";
  return "";
}

inline std::string keys_footer() {
  std::string s = "\nConfiguration keys (--config FILE takes a flat JSON object with these keys;\n"
                  "flags of the same name override it):\n";
  for (const auto& spec : option_specs()) {
    std::string line = "  --" + spec.key;
    line.resize(std::max<size_t>(line.size() + 2, 28), ' ');
    line += spec.help;
    if (!spec.fallback.is_null()) {
      const auto d = spec.fallback.is_string() ? spec.fallback.get<std::string>()
                                               : spec.fallback.dump();
      line += " [default: " + d + "]";
    }
    line += " (" + join(spec.commands, ", ") + ")";
    s += line + "\n";
  }
  s += "\nExit codes: 0 success, 1 runtime failure, 2 usage error, 3 configuration error.\n";
  return s;
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, Io& io) {
  CLI::App app{"hardneg " + std::string(kVersion) +
               ": hard-negative out-of-scope utterance toolchain"};
  app.name("hardneg");
  app.require_subcommand(1, 1);
  app.footer(detail::keys_footer());
  app.set_version_flag("--version", std::string(kVersion));

  struct Bound {
    const OptionSpec* spec;
    CLI::Option* opt;
  };
  std::map<std::string, std::vector<Bound>> bound;
  std::map<std::string, std::string> config_paths;
  // Storage must outlive parsing; deque keeps addresses stable.
  std::deque<std::string> strings;
  std::deque<std::vector<std::string>> lists;
  std::deque<bool> flags;

  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name, std::string(detail::describe_command(name)));
    sub->add_option("--config", config_paths[name], "flat JSON run configuration");
    for (const auto& spec : option_specs()) {
      if (!applies_to(spec, name)) continue;
      const std::string flag = "--" + spec.key;
      CLI::Option* opt = nullptr;
      if (spec.kind == OptKind::kBool) {
        opt = sub->add_flag(flag, flags.emplace_back(false), spec.help);
      } else if (spec.kind == OptKind::kList) {
        opt = sub->add_option(flag, lists.emplace_back(), spec.help)->delimiter(',');
      } else {
        opt = sub->add_option(flag, strings.emplace_back(), spec.help);
      }
      bound[name].push_back({&spec, opt});
    }
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    io.out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    io.err << "usage error: " << e.what() << "\nRun 'hardneg --help' for usage.\n";
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    Json values = Json::object();
    if (!config_paths[command].empty())
      values = load_config_file(config_paths[command], command);
    for (const auto& b : bound[command]) {
      if (b.opt->count() == 0) continue;
      Json raw;
      if (b.spec->kind == OptKind::kBool) {
        raw = true;
      } else if (b.spec->kind == OptKind::kList) {
        raw = b.opt->as<std::vector<std::string>>();
      } else {
        raw = b.opt->as<std::string>();
      }
      values[b.spec->key] = coerce(*b.spec, raw, "--" + b.spec->key);
    }
    Settings settings(command, std::move(values));
    if (command == "mine") return detail::cmd_mine(settings, io);
    if (command == "generate") return detail::cmd_generate(settings, io);
    if (command == "verify") return detail::cmd_verify(settings, io);
    if (command == "review") return detail::cmd_review(settings, io);
    if (command == "assemble") return detail::cmd_assemble(settings, io);
    if (command == "split") return detail::cmd_split(settings, io);
    if (command == "score") return detail::cmd_score(settings, io);
    if (command == "eval") return detail::cmd_eval(settings, io);
    if (command == "report") return detail::cmd_report(settings, io);
    if (command == "replay") return detail::cmd_replay(settings, io);
    throw UsageError("unknown subcommand '" + command + "'");
  } catch (const Error& e) {
    io.err << detail::kind_label(e.kind()) << ": " << e.what() << "\n";
    if (e.kind() == ErrorKind::kUsage) return 2;
    if (e.kind() == ErrorKind::kConfig) return 3;
    return 1;
  } catch (const fs::filesystem_error& e) {
    io.err << "I/O error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int run(int argc, char** argv) {
  Io io{std::cin, std::cout, std::cerr};
  return run(std::vector<std::string>(argv + 1, argv + argc), io);
}

}  // namespace hardneg::cli
