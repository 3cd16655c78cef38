// simclf: corpus ingestion, contrastive training, evaluation and analysis.
//
// Exit codes: 0 success, 2 input or usage error, 3 training failure,
// 4 artifact mismatch.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simclf/augment.hpp"
#include "simclf/corpus.hpp"
#include "simclf/encoder.hpp"
#include "simclf/errors.hpp"
#include "simclf/evaluation.hpp"
#include "simclf/fixture.hpp"
#include "simclf/index.hpp"
#include "simclf/io.hpp"
#include "simclf/metrics.hpp"
#include "simclf/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace simclf;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitTraining = 3;
constexpr int kExitMismatch = 4;

struct CommonFlags {
  std::string corpus;
  std::string vocab;
  std::string checkpoint;
  std::string out = "simclf-out";
  std::string config;
  std::optional<std::uint64_t> seed;
  bool strict = true;
  double holdout = 0.2;

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("SIMCLF_SEED"); env != nullptr && *env != '\0') {
      char* end = nullptr;
      const auto v = std::strtoull(env, &end, 10);
      if (end == nullptr || *end != '\0') throw InputError("SIMCLF_SEED is not an integer");
      return v;
    }
    return 0;
  }
};

// Training and encoder flags. Values set on the command line override the
// --config file, which overrides the defaults.
struct ModelFlags {
  TrainConfig train;
  EncoderConfig encoder;
  std::string pair_source = "corpus";
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["epochs"] = app->add_option("--epochs", train.epochs, "Training epochs");
    opts["batch"] = app->add_option("--batch-size", train.batch_size, "Pairs per minibatch");
    opts["tau"] = app->add_option("--temperature", train.temperature, "NT-Xent temperature");
    opts["lr"] = app->add_option("--lr", train.learning_rate, "Adam learning rate");
    opts["wd"] = app->add_option("--weight-decay", train.weight_decay, "Decoupled weight decay");
    opts["dim"] = app->add_option("--embed-dim", encoder.embed_dim, "Embedding dimension");
    opts["maxlen"] = app->add_option("--max-len", encoder.max_input_length, "Max tokens");
    opts["attn"] = app->add_option("--use-attention", encoder.use_attention, "true|false");
    opts["head"] = app->add_option("--use-head", encoder.use_projection_head, "true|false");
    opts["pairs"] =
        app->add_option("--pair-source", pair_source, "corpus|augment")
            ->check(CLI::IsMember({"corpus", "augment"}));
  }

  // Applies the config file underneath values given as flags. The file's
  // seed is used only when neither --seed nor SIMCLF_SEED is set.
  void resolve(CommonFlags& common) {
    if (!common.config.empty()) {
      TrainConfig file_train;
      EncoderConfig file_encoder;
      apply_config_file(fs::path(common.config), file_train, file_encoder);
      auto keep = [&](const char* key, auto& dst, const auto& src) {
        if (opts[key]->count() == 0) dst = src;
      };
      keep("epochs", train.epochs, file_train.epochs);
      keep("batch", train.batch_size, file_train.batch_size);
      keep("tau", train.temperature, file_train.temperature);
      keep("lr", train.learning_rate, file_train.learning_rate);
      keep("wd", train.weight_decay, file_train.weight_decay);
      keep("dim", encoder.embed_dim, file_encoder.embed_dim);
      keep("maxlen", encoder.max_input_length, file_encoder.max_input_length);
      keep("attn", encoder.use_attention, file_encoder.use_attention);
      keep("head", encoder.use_projection_head, file_encoder.use_projection_head);
      train.adam_beta1 = file_train.adam_beta1;
      train.adam_beta2 = file_train.adam_beta2;
      train.adam_eps = file_train.adam_eps;
      encoder.head_dim = file_encoder.head_dim;
      if (opts["pairs"]->count() == 0) pair_source = std::string(to_string(file_train.pair_source));
      if (!common.seed && std::getenv("SIMCLF_SEED") == nullptr) common.seed = file_train.seed;
    }
    train.pair_source = parse_pair_source(pair_source);
    train.seed = common.resolved_seed();
    encoder.seed = train.seed;
    if (train.pair_source == PairSource::kAugment) {
      train.augment.transforms = {{TransformKind::kRegisterRename, 0.5},
                                  {TransformKind::kNopInsertion, 0.3},
                                  {TransformKind::kBlockSplit, 0.5}};
    }
  }
};

void add_common(CLI::App* app, CommonFlags& f, bool corpus_required) {
  auto* c = app->add_option("--corpus", f.corpus, "Corpus JSONL file");
  if (corpus_required) c->required();
  app->add_option("--vocab", f.vocab, "Vocabulary file (default: built from the corpus)");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--seed", f.seed, "Seed (falls back to SIMCLF_SEED, then 0)");
  app->add_option("--config", f.config, "key=value training config file");
  app->add_flag("--strict,!--no-strict", f.strict, "Reject malformed corpus lines");
  app->add_option("--holdout", f.holdout, "Fraction of groups held out for evaluation")
      ->check(CLI::Range(0.0, 0.99));
}

Corpus load_corpus(const CommonFlags& f, std::size_t max_len) {
  CorpusOptions options;
  options.strict = f.strict;
  options.max_input_length = max_len;
  if (f.vocab.empty()) return parse_corpus(fs::path(f.corpus), nullptr, options);
  const Vocab vocab = Vocab::load(f.vocab);
  return parse_corpus(fs::path(f.corpus), &vocab, options);
}

void check_vocab(const EncoderParams& params, const Corpus& corpus) {
  if (params.config.vocab_size != corpus.vocab.size()) {
    throw MismatchError("checkpoint vocab size " + std::to_string(params.config.vocab_size) +
                        " does not match corpus vocab size " +
                        std::to_string(corpus.vocab.size()));
  }
}

fs::path out_path(const CommonFlags& f, const char* name) {
  return fs::path(f.out) / name;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// Held-out split shared by train, eval and fewshot so that they agree on which
// groups are unseen.
GroupSplit holdout_split(const Corpus& corpus, const CommonFlags& f) {
  if (f.holdout == 0.0) return {corpus.groups, corpus.groups};
  auto split = split_groups(corpus.groups, f.holdout, f.resolved_seed());
  if (split.test.empty()) throw InputError("holdout leaves no evaluation groups");
  return split;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string histogram_csv(const SimilarityHistogram& h) {
  std::string out = "bucket_lower,bucket_upper,similar,dissimilar\n";
  for (std::size_t b = 0; b < h.buckets(); ++b) {
    out += fmt(h.lower_edge(b)) + "," + fmt(std::min(1.0, h.lower_edge(b + 1))) + "," +
           std::to_string(h.similar[b]) + "," + std::to_string(h.dissimilar[b]) + "\n";
  }
  return out;
}

std::string svd_csv(const std::vector<std::string>& ids, const std::vector<std::string>& groups,
                    const Rank2Projection& svd) {
  std::string out = "instance_id,group_id,x,y\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i] + "," + groups[i] + "," + fmt(svd.coordinates[i](0)) + "," +
           fmt(svd.coordinates[i](1)) + "\n";
  }
  return out;
}

std::vector<std::string> group_ids_of(const std::vector<FunctionGroup>& groups) {
  std::vector<std::string> out;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.members.size(); ++i) out.push_back(g.group_id);
  }
  return out;
}

json metrics_json(const EvalReport& r) {
  json j;
  j["auc"] = r.auc;
  const auto& first = r.pools.begin()->second;
  j["mrr"] = first.mrr;
  j["recall_at_1"] = first.recall_at_1;
  j["alignment"] = r.alignment;
  j["uniformity"] = r.uniformity;
  j["pools"] = json::array();
  for (const auto& [size, s] : r.pools) {
    j["pools"].push_back(
        {{"pool_size", size}, {"pools", s.pools}, {"mrr", s.mrr}, {"recall_at_1", s.recall_at_1}});
  }
  std::size_t similar = 0;
  for (const auto& p : r.scored) similar += p.similar ? 1 : 0;
  j["counts"] = {{"groups", r.groups},
                 {"instances", r.instances},
                 {"similar_pairs", similar},
                 {"dissimilar_pairs", r.scored.size() - similar}};
  return j;
}

int cmd_ingest(const CommonFlags& f, std::size_t max_len) {
  const Corpus corpus = load_corpus(f, max_len);
  const fs::path vocab_path = f.vocab.empty() ? out_path(f, "vocab.txt") : fs::path(f.vocab);
  if (f.vocab.empty()) corpus.vocab.save(vocab_path);
  json j;
  j["groups"] = corpus.stats.groups;
  j["instances"] = corpus.stats.instances;
  j["pair_eligible_groups"] = std::count_if(corpus.groups.begin(), corpus.groups.end(),
                                            [](const FunctionGroup& g) { return g.pair_eligible(); });
  j["tokens"] = corpus.stats.tokens;
  j["oov_tokens"] = corpus.stats.oov_tokens;
  j["oov_rate"] = corpus.stats.oov_rate();
  j["truncated"] = corpus.stats.truncated;
  j["skipped_lines"] = corpus.stats.skipped_lines;
  j["vocab_size"] = corpus.vocab.size();
  j["vocab"] = vocab_path.string();
  write_json(out_path(f, "stats.json"), j);
  std::cerr << "ingested " << corpus.stats.instances << " instances in " << corpus.stats.groups
            << " groups; vocab " << corpus.vocab.size() << "\n";
  return 0;
}

void log_epoch(const EpochRecord& e) {
  std::fprintf(stderr, "epoch %zu loss %.5f alignment %.4f uniformity %.4f (%.1fs)\n", e.epoch,
               e.mean_loss, e.alignment, e.uniformity, e.wall_seconds);
}

int cmd_train(CommonFlags& f, ModelFlags& m) {
  m.resolve(f);
  const Corpus corpus = load_corpus(f, m.encoder.max_input_length);
  m.encoder.vocab_size = corpus.vocab.size();
  m.encoder.validate();
  m.train.validate();
  const auto split = holdout_split(corpus, f);
  const AugmentLexicon lexicon(corpus.vocab);
  const ProbeSet probe = m.train.pair_source == PairSource::kAugment
                             ? make_augment_probe_set(split.test, m.train.augment, lexicon)
                             : make_probe_set(split.test);

  auto result = train(split.train, m.encoder, m.train, &probe, &lexicon, log_epoch);
  const fs::path ckpt = f.checkpoint.empty() ? out_path(f, "checkpoint.bin") : fs::path(f.checkpoint);
  save_checkpoint(result.params, ckpt);
  if (f.vocab.empty()) corpus.vocab.save(out_path(f, "vocab.txt"));
  result.report.checkpoint_path = ckpt.string();
  write_file_atomic(out_path(f, "report.jsonl"), result.report.to_jsonl());
  std::cerr << "wrote " << ckpt.string() << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::vector<std::size_t>& pool_sizes) {
  if (f.checkpoint.empty()) throw InputError("eval needs --checkpoint");
  const EncoderParams params = load_checkpoint(f.checkpoint);
  const Corpus corpus = load_corpus(f, params.config.max_input_length);
  check_vocab(params, corpus);
  const auto split = holdout_split(corpus, f);
  EvalOptions options;
  options.pool_sizes = pool_sizes;
  options.seed = f.resolved_seed();
  const EvalReport report = evaluate(params, split.test, options);
  write_json(out_path(f, "metrics.json"), metrics_json(report));
  write_file_atomic(out_path(f, "histogram.csv"), histogram_csv(report.histogram));
  write_file_atomic(out_path(f, "svd.csv"),
                    svd_csv(report.ids, group_ids_of(split.test), report.svd));
  std::fprintf(stderr, "auc %.4f mrr %.4f recall@1 %.4f\n", report.auc,
               report.pools.begin()->second.mrr, report.pools.begin()->second.recall_at_1);
  return 0;
}

int cmd_fewshot(CommonFlags& f, ModelFlags& m, const std::vector<std::size_t>& sizes) {
  m.resolve(f);
  const Corpus corpus = load_corpus(f, m.encoder.max_input_length);
  m.encoder.vocab_size = corpus.vocab.size();
  m.encoder.validate();
  m.train.validate();
  const auto split = holdout_split(corpus, f);
  const EncoderParams initial = init_params(m.encoder);
  const ProbeSet probe = make_probe_set(split.test);
  const auto result = few_shot(initial, split.train, split.test, m.train, sizes,
                               f.resolved_seed(), &probe);

  json rows = json::array();
  std::string csv = "pairs,auc\n";
  for (const auto& row : result) {
    std::fprintf(stderr, "pairs %zu auc %.4f\n", row.pairs, row.auc);
    rows.push_back({{"pairs", row.pairs}, {"auc", row.auc}});
    csv += std::to_string(row.pairs) + "," + fmt(row.auc) + "\n";
  }
  write_json(out_path(f, "fewshot.json"), json{{"rows", rows}});
  write_file_atomic(out_path(f, "fewshot.csv"), csv);
  return 0;
}

int cmd_sweep(CommonFlags& f, ModelFlags& m, const std::vector<double>& temperatures) {
  m.resolve(f);
  const Corpus corpus = load_corpus(f, m.encoder.max_input_length);
  m.encoder.vocab_size = corpus.vocab.size();
  m.encoder.validate();
  const auto split = holdout_split(corpus, f);
  const ProbeSet probe = make_probe_set(split.test);
  const AugmentLexicon lexicon(corpus.vocab);
  const auto seed = f.resolved_seed();
  const auto rows = temperature_sweep(
      split.train, m.encoder, m.train, temperatures,
      [&](const EncoderParams& p) { return pair_auc(p, split.test, seed); }, &probe, &lexicon);
  json out = json::array();
  std::string csv = "temperature,auc,error\n";
  for (const auto& r : rows) {
    json row{{"temperature", r.temperature}};
    row["auc"] = r.auc ? json(*r.auc) : json(nullptr);
    row["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    out.push_back(row);
    csv += fmt(r.temperature) + "," + (r.auc ? fmt(*r.auc) : "") + ",\"" + r.error + "\"\n";
  }
  write_json(out_path(f, "sweep.json"), json{{"rows", out}});
  write_file_atomic(out_path(f, "sweep.csv"), csv);
  return 0;
}

std::vector<VulnerableGroup> read_vulnerable_groups(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  std::vector<VulnerableGroup> out;
  try {
    for (const auto& g : j.at("groups")) {
      out.push_back({g.at("name").get<std::string>(), g.at("ids").get<std::vector<std::string>>()});
    }
  } catch (const json::exception& e) {
    throw InputError(path + ": expected {\"groups\": [{\"name\", \"ids\"}]}: " + e.what());
  }
  return out;
}

int cmd_search(const CommonFlags& f, const std::vector<std::string>& queries, std::size_t k,
               const std::string& vulnerable) {
  if (k == 0) throw InputError("--k must be >= 1");
  if (f.checkpoint.empty()) throw InputError("search needs --checkpoint");
  if (queries.empty() && vulnerable.empty()) throw InputError("give --query or --vulnerable");
  const EncoderParams params = load_checkpoint(f.checkpoint);
  const Corpus corpus = load_corpus(f, params.config.max_input_length);
  check_vocab(params, corpus);

  std::vector<std::pair<std::string, Embedding>> entries;
  for (const auto& g : corpus.groups) {
    for (const auto& m : g.members) {
      entries.emplace_back(m.instance_id, encode(params, m.tokens, Stage::kEvaluation));
    }
  }
  const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
  save_index(index, out_path(f, "index.bin"));

  json out;
  out["k"] = k;
  out["index_size"] = index.size();
  out["results"] = json::array();
  for (const auto& q : queries) {
    if (!index.contains(q)) throw InputError("unknown query id '" + q + "'");
    json hits = json::array();
    for (const auto& h : index.top_k(index.embedding(q), k, q)) {
      hits.push_back({{"instance_id", h.instance_id}, {"score", h.score}});
    }
    out["results"].push_back({{"query", q}, {"hits", hits}});
  }
  if (!vulnerable.empty()) {
    json rows = json::array();
    for (const auto& r : vulnerability_search(index, read_vulnerable_groups(vulnerable))) {
      rows.push_back({{"name", r.name},
                      {"k", r.k},
                      {"found", r.found},
                      {"recall", r.recall()},
                      {"complete", r.complete()}});
    }
    out["vulnerability"] = rows;
  }
  write_json(out_path(f, "search.json"), out);
  return 0;
}

int cmd_analyze(const CommonFlags& f, std::size_t max_len) {
  std::optional<EncoderParams> params;
  if (!f.checkpoint.empty()) {
    params = load_checkpoint(f.checkpoint);
    max_len = params->config.max_input_length;
  }
  const Corpus corpus = load_corpus(f, max_len);
  std::string zipf = "rank,token,count\n";
  const auto ranks = token_frequency_ranks(corpus.groups, corpus.vocab);
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    zipf += std::to_string(i + 1) + ",\"" + ranks[i].first + "\"," +
            std::to_string(ranks[i].second) + "\n";
  }
  write_file_atomic(out_path(f, "zipf.csv"), zipf);
  if (!params) return 0;

  check_vocab(*params, corpus);
  EvalOptions options;
  options.seed = f.resolved_seed();
  options.pool_sizes = {};
  const EvalReport report = evaluate(*params, corpus.groups, options);
  write_file_atomic(out_path(f, "svd.csv"),
                    svd_csv(report.ids, group_ids_of(corpus.groups), report.svd));
  write_file_atomic(out_path(f, "histogram.csv"), histogram_csv(report.histogram));
  return 0;
}

int cmd_fixture(const CommonFlags& f, FixtureConfig config) {
  config.seed = f.resolved_seed();
  const fs::path path = f.corpus.empty() ? out_path(f, "fixture.jsonl") : fs::path(f.corpus);
  write_corpus(make_fixture(config), path);
  std::cerr << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive function-embedding toolkit"};
  app.require_subcommand(1);

  CommonFlags common;
  ModelFlags train_model;
  ModelFlags fewshot_model;
  ModelFlags sweep_model;
  std::size_t max_len = 512;
  std::vector<std::size_t> pool_sizes = {32};
  std::vector<std::size_t> sizes = {2, 8, 32, 128, 512, 2048};
  std::vector<double> temperatures = {0.01, 0.07, 0.5, 1.0};
  std::vector<std::string> queries;
  std::size_t k = 10;
  std::string vulnerable;
  FixtureConfig fixture;

  auto* ingest = app.add_subcommand("ingest", "Parse a corpus, write vocab and stats");
  add_common(ingest, common, true);
  ingest->add_option("--max-len", max_len, "Max tokens per function");

  auto* train_cmd = app.add_subcommand("train", "Train an encoder");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--checkpoint", common.checkpoint, "Checkpoint output path");
  train_model.add(train_cmd);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out groups");
  add_common(eval, common, true);
  eval->add_option("--checkpoint", common.checkpoint, "Checkpoint")->required();
  eval->add_option("--pool-size", pool_sizes, "Pool sizes")->delimiter(',');

  auto* fewshot = app.add_subcommand("fewshot", "Train on nested few-shot subsets");
  add_common(fewshot, common, true);
  fewshot_model.add(fewshot);
  fewshot->add_option("--sizes", sizes, "Pair counts")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "Train once per temperature");
  add_common(sweep, common, true);
  sweep_model.add(sweep);
  sweep->add_option("--temperatures", temperatures, "Temperatures")->delimiter(',');

  auto* search = app.add_subcommand("search", "Nearest-neighbour search over a corpus");
  add_common(search, common, true);
  search->add_option("--checkpoint", common.checkpoint, "Checkpoint")->required();
  search->add_option("--query", queries, "Query instance id (repeatable)");
  search->add_option("--k", k, "Results per query");
  search->add_option("--vulnerable", vulnerable, "JSON file of vulnerable id groups");

  auto* analyze = app.add_subcommand("analyze", "Zipf, SVD and histogram plot data");
  add_common(analyze, common, true);
  analyze->add_option("--checkpoint", common.checkpoint, "Checkpoint");
  analyze->add_option("--max-len", max_len, "Max tokens per function");

  auto* fixture_cmd = app.add_subcommand("fixture", "Write the synthetic fixture corpus");
  add_common(fixture_cmd, common, false);
  fixture_cmd->add_option("--groups", fixture.groups, "Groups");
  fixture_cmd->add_option("--variants", fixture.variants, "Variants per group");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    fs::create_directories(common.out);
    if (*ingest) return cmd_ingest(common, max_len);
    if (*train_cmd) return cmd_train(common, train_model);
    if (*eval) return cmd_eval(common, pool_sizes);
    if (*fewshot) return cmd_fewshot(common, fewshot_model, sizes);
    if (*sweep) return cmd_sweep(common, sweep_model, temperatures);
    if (*search) return cmd_search(common, queries, k, vulnerable);
    if (*analyze) return cmd_analyze(common, max_len);
    if (*fixture_cmd) return cmd_fixture(common, fixture);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitTraining;
  } catch (const MismatchError& e) {
    std::cerr << "mismatch: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
