// protoseq command-line tool: episodic training, evaluation and diagnostics
// for few-shot emotion sequence labeling.
//
// Commands: train, eval, gradcheck, sample, synth, report.
// A json config file (--config) supplies defaults; explicit flags win.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "protoseq/protoseq.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace protoseq;

namespace {

// recursive object merge: values from `over` replace values in `base`
void merge_json(json& base, const json& over) {
  if (!base.is_object() || !over.is_object()) {
    base = over;
    return;
  }
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (base.contains(it.key()))
      merge_json(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

json default_config() {
  return json{
      {"variant", "protoseq"},
      {"seed", 0},
      {"threads", 1},
      {"excluded_labels", json::array()},
      {"paths",
       {{"train", ""}, {"val", ""}, {"test", ""}, {"embeddings", ""}, {"out", ""}, {"model", ""}, {"metrics", ""}}},
      {"episode", {{"ways", 0}, {"shots", 5}, {"queries", 10}, {"max_len", 35}}},
      {"train",
       {{"episodes_per_epoch", 100},
        {"val_episodes", 100},
        {"test_episodes", 1000},
        {"max_epochs", 1000},
        {"patience", 100},
        {"lr", 1e-3},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"eps", 1e-8}}},
      {"model",
       {{"embed_dim", 300},
        {"cnn_filters", 50},
        {"cnn_widths", {3, 4, 5}},
        {"lstm_hidden", 150},
        {"mlp_hidden", 128},
        {"proto_dim", 128},
        {"dropout", 0.2}}},
      {"gradcheck",
       {{"h", 1e-5},
        {"tol", 1e-4},
        {"ways", 3},
        {"shots", 2},
        {"queries", 2},
        // reduced dimensions keep the finite-difference sweep fast; the
        // wiring being checked is identical to the full-size model
        {"model",
         {{"embed_dim", 8},
          {"cnn_filters", 4},
          {"cnn_widths", {2, 3}},
          {"lstm_hidden", 6},
          {"mlp_hidden", 12},
          {"proto_dim", 12},
          {"dropout", 0.2}}}}},
      {"synth",
       {{"preset", "separable"},
        {"labels", 3},
        {"conversations", 300},
        {"lambda", -1.0},
        {"len_min", 4},
        {"len_max", 10},
        {"tokens_min", 3},
        {"tokens_max", 8}}}};
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw std::invalid_argument("missing required path: " + what);
  if (!fs::exists(path)) throw std::invalid_argument(what + " path does not exist: " + path);
}

ModelConfig model_config_from(const json& section, Variant variant) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.embed_dim = section.at("embed_dim").get<int>();
  cfg.cnn_filters = section.at("cnn_filters").get<int>();
  cfg.cnn_widths = section.at("cnn_widths").get<std::vector<int>>();
  cfg.lstm_hidden = section.at("lstm_hidden").get<int>();
  cfg.mlp_hidden = section.at("mlp_hidden").get<int>();
  cfg.proto_dim = section.at("proto_dim").get<int>();
  cfg.dropout = section.at("dropout").get<double>();
  return cfg;
}

EpisodeSpec episode_spec_from(const json& cfg, const Corpus& corpus) {
  EpisodeSpec spec;
  spec.n_ways = cfg["episode"]["ways"].get<int>();
  if (spec.n_ways == 0) spec.n_ways = static_cast<int>(corpus.num_labels());  // 0 = full label set
  spec.n_shots = cfg["episode"]["shots"].get<int>();
  spec.n_queries = cfg["episode"]["queries"].get<int>();
  spec.max_len = cfg["episode"]["max_len"].get<std::size_t>();
  return spec;
}

TrainConfig train_config_from(const json& cfg, const Corpus& corpus) {
  TrainConfig tc;
  const json& t = cfg["train"];
  tc.episodes_per_epoch = t["episodes_per_epoch"].get<int>();
  tc.val_episodes = t["val_episodes"].get<int>();
  tc.test_episodes = t["test_episodes"].get<int>();
  tc.max_epochs = t["max_epochs"].get<int>();
  tc.patience = t["patience"].get<int>();
  tc.lr = t["lr"].get<double>();
  tc.beta1 = t["beta1"].get<double>();
  tc.beta2 = t["beta2"].get<double>();
  tc.eps = t["eps"].get<double>();
  tc.seed = cfg["seed"].get<std::uint64_t>();
  tc.threads = cfg["threads"].get<int>();
  tc.excluded_labels = cfg["excluded_labels"].get<std::vector<std::string>>();
  tc.episode = episode_spec_from(cfg, corpus);
  return tc;
}

EmbeddingMatrix embeddings_for(const json& cfg, const Vocab& vocab, std::uint64_t seed) {
  const std::string path = cfg["paths"]["embeddings"].get<std::string>();
  const std::size_t dim = static_cast<std::size_t>(cfg["model"]["embed_dim"].get<int>());
  if (path.empty()) {
    std::cerr << "note: no --embeddings given; using random " << dim << "-d token vectors\n";
    return random_embeddings(vocab, dim, seed);
  }
  require_file(path, "--embeddings");
  EmbeddingLoadStats stats;
  EmbeddingMatrix emb = load_embeddings(path, vocab, dim, seed, &stats);
  std::cerr << "embeddings: " << stats.found << " found, " << stats.missing << " random-initialized, "
            << stats.skipped_lines << " lines skipped\n";
  return emb;
}

std::string render_report(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "variant: " << r.variant << "   episodes: " << r.n_episodes << "\n";
  if (!r.excluded_labels.empty()) {
    os << "excluded from micro/weighted F1:";
    for (const std::string& l : r.excluded_labels) os << " " << l;
    os << "\n";
  }
  os << "F1 (micro, pooled):    " << r.f1_micro << (r.micro_undefined ? "  [undefined: no scoreable positions]" : "")
     << "\n";
  os << "F1 (weighted, pooled): " << r.f1_weighted << "\n";
  os << "MCC (all labels):      " << r.mcc_score << "\n";
  os << "per-episode micro F1:  " << r.episode_mean << " +/- " << r.episode_std << " (std over " << r.n_episodes
     << " episodes)\n";
  os << "\n" << std::left << std::setw(18) << "label" << std::right << std::setw(10) << "precision" << std::setw(10)
     << "recall" << std::setw(10) << "f1" << std::setw(10) << "support" << "\n";
  for (const ClassStats& s : r.per_class)
    os << std::left << std::setw(18) << s.label << std::right << std::setw(10) << s.precision << std::setw(10)
       << s.recall << std::setw(10) << s.f1 << std::setw(10) << s.support << "\n";
  return os.str();
}

Corpus load_split(const std::string& path, const std::string& what, const std::string& tag) {
  require_file(path, what);
  CorpusLoadStats stats;
  Corpus c = load_corpus(path, &stats);
  c.split = tag;
  if (stats.unknown_fields > 0)
    std::cerr << "warning: " << path << ": ignored " << stats.unknown_fields << " unknown schema fields\n";
  return c;
}

SynthSpec synth_spec_from(const json& cfg) {
  const json& s = cfg["synth"];
  const std::string preset = s["preset"].get<std::string>();
  const int n_labels = s["labels"].get<int>();
  const double lambda_override = s["lambda"].get<double>();

  SynthSpec spec;
  if (preset == "separable") {
    // disjoint per-label lexicons: labels are recoverable from tokens alone
    for (int i = 0; i < n_labels; ++i) {
      spec.labels.push_back(std::string(1, static_cast<char>('a' + i)));
      spec.lexicons.push_back(make_lexicon("w" + std::to_string(i) + "x", 8));
    }
    spec.transition.assign(n_labels, std::vector<double>(n_labels, 1.0 / n_labels));
    spec.confuser = make_lexicon("shared", 8);
    spec.lambda = lambda_override >= 0 ? lambda_override : 1.0;
  } else if (preset == "transition") {
    // two emission-ambiguous labels plus a token-recoverable anchor on a
    // deterministic label cycle: sequence structure, not tokens, separates
    // the ambiguous pair
    spec.labels = {"a", "anchor", "b"};
    spec.lexicons = {make_lexicon("wax", 6), make_lexicon("anc", 8), make_lexicon("wbx", 6)};
    spec.confuser = make_lexicon("shared", 12);
    spec.transition = {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};  // a -> b -> anchor -> a
    const double amb = lambda_override >= 0 ? lambda_override : 0.1;
    spec.lambda_per_label = {amb, 1.0, amb};
  } else {
    throw std::invalid_argument("unknown synth preset \"" + preset + "\"; valid: separable, transition");
  }
  spec.n_conversations = s["conversations"].get<std::size_t>();
  spec.len_min = s["len_min"].get<std::size_t>();
  spec.len_max = s["len_max"].get<std::size_t>();
  spec.tokens_min = s["tokens_min"].get<std::size_t>();
  spec.tokens_max = s["tokens_max"].get<std::size_t>();
  return spec;
}

SynthSpec synth_spec_from_file(const std::string& path) {
  json j = load_json_file(path);
  SynthSpec spec;
  spec.labels = j.at("labels").get<std::vector<std::string>>();
  spec.transition = j.at("transition").get<std::vector<std::vector<double>>>();
  spec.lexicons = j.at("lexicons").get<std::vector<std::vector<std::string>>>();
  spec.confuser = j.value("confuser", std::vector<std::string>{});
  spec.lambda = j.value("lambda", 1.0);
  spec.lambda_per_label = j.value("lambda_per_label", std::vector<double>{});
  spec.n_conversations = j.value("conversations", std::size_t{100});
  spec.len_min = j.value("len_min", std::size_t{4});
  spec.len_max = j.value("len_max", std::size_t{10});
  spec.tokens_min = j.value("tokens_min", std::size_t{3});
  spec.tokens_max = j.value("tokens_max", std::size_t{8});
  return spec;
}

json conversation_to_json(const Conversation& c) {
  json obj;
  obj["id"] = c.id;
  json msgs = json::array();
  for (const Message& m : c.messages)
    msgs.push_back({{"speaker", m.speaker}, {"text", m.text}, {"tokens", m.tokens}, {"label", m.label}});
  obj["messages"] = std::move(msgs);
  if (c.satisfaction) obj["meta"] = {{"satisfaction", *c.satisfaction}};
  return obj;
}

// ---- subcommands -------------------------------------------------------------

int run_train(const json& cfg) {
  const Variant variant = variant_from_string(cfg["variant"].get<std::string>());
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const std::string out_dir = cfg["paths"]["out"].get<std::string>();
  if (out_dir.empty()) throw std::invalid_argument("train: --out DIR is required");
  fs::create_directories(out_dir);

  Corpus train_corpus = load_split(cfg["paths"]["train"].get<std::string>(), "--train", "train");
  Corpus val_corpus = load_split(cfg["paths"]["val"].get<std::string>(), "--val", "val");
  Corpus test_corpus = load_split(cfg["paths"]["test"].get<std::string>(), "--test", "test");

  Vocab vocab = Vocab::build({&train_corpus, &val_corpus, &test_corpus});
  EmbeddingMatrix emb = embeddings_for(cfg, vocab, seed);

  Model model(model_config_from(cfg["model"], variant), static_cast<int>(train_corpus.num_labels()), seed);
  TrainConfig tc = train_config_from(cfg, train_corpus);

  std::cerr << "training " << to_string(variant) << " on " << train_corpus.conversations.size()
            << " conversations, " << train_corpus.num_labels() << " labels\n";
  TrainResult result = train(model, train_corpus, val_corpus, vocab, emb, tc);
  std::cerr << "stopped at epoch " << result.stopped_epoch << "; best val F1-micro " << result.best_val_f1
            << " at epoch " << result.best_epoch << "\n";

  MetricsReport report = evaluate(model, test_corpus, vocab, emb, tc.episode, tc.test_episodes, tc.excluded_labels,
                                  substream_seed(seed, "test-episodes"), tc.threads);

  const std::string emb_path = cfg["paths"]["embeddings"].get<std::string>();
  save_model((fs::path(out_dir) / "model.psqm").string(), model, train_corpus.label_set,
             json{{"embedding_seed", seed}, {"embedding_source", emb_path.empty() ? "random" : "file"}});
  write_history((fs::path(out_dir) / "history.log").string(), result.history);
  std::ofstream((fs::path(out_dir) / "metrics.json").string()) << report.to_json().dump(2) << "\n";
  write_manifest((fs::path(out_dir) / "manifest.json").string(), cfg, seed,
                 {{"train", cfg["paths"]["train"]},
                  {"val", cfg["paths"]["val"]},
                  {"test", cfg["paths"]["test"]}});
  std::cout << render_report(report);
  return 0;
}

int run_eval(const json& cfg) {
  const std::string model_path = cfg["paths"]["model"].get<std::string>();
  require_file(model_path, "--model");
  ModelFile file = read_model_file(model_path);
  Model model = model_from_file(file);

  Corpus test_corpus = load_split(cfg["paths"]["test"].get<std::string>(), "--test", "test");
  if (test_corpus.label_set != file.label_set)
    throw std::invalid_argument("eval: test corpus label set differs from the one the model was trained on");

  Vocab vocab = Vocab::build({&test_corpus});
  // token vectors must match the ones the model was trained with: same file
  // rows, and random rows keyed on the training-time embedding seed
  const json extra = file.config.value("extra", json::object());
  const std::uint64_t emb_seed = extra.value("embedding_seed", cfg["seed"].get<std::uint64_t>());
  const std::string emb_source = extra.value("embedding_source", std::string("random"));
  EmbeddingMatrix emb;
  if (emb_source == "file") {
    const std::string path = cfg["paths"]["embeddings"].get<std::string>();
    if (path.empty())
      throw std::invalid_argument("eval: this model was trained with an embedding file; pass --embeddings");
    require_file(path, "--embeddings");
    EmbeddingLoadStats stats;
    emb = load_embeddings(path, vocab, static_cast<std::size_t>(file.model_config.embed_dim), emb_seed, &stats);
  } else {
    emb = random_embeddings(vocab, static_cast<std::size_t>(file.model_config.embed_dim), emb_seed);
  }

  EpisodeSpec spec = episode_spec_from(cfg, test_corpus);
  MetricsReport report =
      evaluate(model, test_corpus, vocab, emb, spec, cfg["train"]["test_episodes"].get<int>(),
               cfg["excluded_labels"].get<std::vector<std::string>>(), cfg["seed"].get<std::uint64_t>(),
               cfg["threads"].get<int>());

  const std::string out_dir = cfg["paths"]["out"].get<std::string>();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream((fs::path(out_dir) / "metrics.json").string()) << report.to_json().dump(2) << "\n";
    write_manifest((fs::path(out_dir) / "manifest.json").string(), cfg, cfg["seed"].get<std::uint64_t>(),
                   {{"model", model_path}, {"test", cfg["paths"]["test"]}});
  }
  std::cout << render_report(report);
  return 0;
}

int run_gradcheck(const json& cfg) {
  const Variant variant = variant_from_string(cfg["variant"].get<std::string>());
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const json& gc = cfg["gradcheck"];

  ModelConfig mc = model_config_from(gc["model"], variant);
  const int ways = gc["ways"].get<int>();

  SynthSpec spec;
  for (int i = 0; i < ways; ++i) {
    spec.labels.push_back(std::string(1, static_cast<char>('a' + i)));
    spec.lexicons.push_back(make_lexicon("w" + std::to_string(i) + "x", 6));
  }
  spec.transition.assign(ways, std::vector<double>(ways, 1.0 / ways));
  spec.confuser = make_lexicon("shared", 6);
  spec.n_conversations = 40;
  spec.len_min = 3;
  spec.len_max = 6;
  spec.tokens_min = 2;
  spec.tokens_max = 5;
  Corpus corpus = generate_synthetic(spec, substream_seed(seed, "gradcheck-corpus"));
  Vocab vocab = Vocab::build({&corpus});
  EmbeddingMatrix emb = random_embeddings(vocab, static_cast<std::size_t>(mc.embed_dim), seed, 0.5);

  EpisodeSampler sampler(corpus,
                         EpisodeSpec{.n_ways = ways,
                                     .n_shots = gc["shots"].get<int>(),
                                     .n_queries = gc["queries"].get<int>(),
                                     .max_len = 8},
                         substream_seed(seed, "gradcheck-episode"));
  Episode episode = sampler.sample();

  Model model(mc, ways, seed);
  std::vector<Parameter*> params = model.parameters();
  Rng dropout_rng(1);  // eval mode: unused
  GradCheckReport report = grad_check(
      [&](Tape& t) { return model.episode_loss(t, episode, vocab, emb, dropout_rng); }, params,
      gc["h"].get<double>(), gc["tol"].get<double>());

  std::cout << "variant:          " << to_string(variant) << "\n";
  std::cout << "parameter entries: " << report.entries_checked << "\n";
  std::cout << std::scientific << std::setprecision(3);
  std::cout << "max rel err:      " << report.max_rel_err << " (tol " << report.tol << ")\n";
  if (report.entries_checked > 0)
    std::cout << "worst entry:      " << report.worst.param << "[" << report.worst.index << "] analytic "
              << report.worst.analytic << " vs numeric " << report.worst.numeric << "\n";
  std::cout << (report.ok() ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
  return report.ok() ? 0 : 1;
}

int run_sample(const json& cfg) {
  Corpus corpus = load_split(cfg["paths"]["train"].get<std::string>(), "--train", "train");
  EpisodeSpec spec = episode_spec_from(cfg, corpus);
  EpisodeSampler sampler(corpus, spec, cfg["seed"].get<std::uint64_t>());
  Episode ep = sampler.sample();

  std::ostream* out = &std::cout;
  std::ofstream file;
  const std::string out_path = cfg["paths"]["out"].get<std::string>();
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write episode dump: " + out_path);
    out = &file;
  }
  (*out) << json{{"type", "episode"},
                 {"ways", spec.n_ways},
                 {"shots", spec.n_shots},
                 {"queries", spec.n_queries},
                 {"max_len", spec.max_len}}
                .dump()
         << "\n";
  for (std::size_t k = 0; k < ep.support.size(); ++k) {
    for (std::size_t ci : ep.support[k])
      (*out) << json{{"type", "support"},
                     {"class", corpus.label_set[k]},
                     {"conversation", conversation_to_json(corpus.conversations[ci])}}
                    .dump()
             << "\n";
    for (std::size_t ci : ep.query[k])
      (*out) << json{{"type", "query"},
                     {"class", corpus.label_set[k]},
                     {"conversation", conversation_to_json(corpus.conversations[ci])}}
                    .dump()
             << "\n";
  }
  return 0;
}

int run_synth(const json& cfg, const std::string& spec_file) {
  const std::string out_path = cfg["paths"]["out"].get<std::string>();
  if (out_path.empty()) throw std::invalid_argument("synth: --out FILE is required");
  SynthSpec spec = spec_file.empty() ? synth_spec_from(cfg) : synth_spec_from_file(spec_file);
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  Corpus corpus = generate_synthetic(spec, seed);
  save_corpus(corpus, out_path);
  write_manifest(out_path + ".manifest.json", cfg, seed, {{"corpus", out_path}});
  std::cerr << "wrote " << corpus.conversations.size() << " conversations, " << corpus.num_labels() << " labels to "
            << out_path << "\n";
  return 0;
}

int run_report(const json& cfg) {
  const std::string path = cfg["paths"]["metrics"].get<std::string>();
  require_file(path, "--metrics");
  MetricsReport report = MetricsReport::from_json(load_json_file(path));
  std::cout << render_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protoseq: few-shot emotion sequence labeling over conversations"};
  app.require_subcommand(1);

  std::string config_path, variant, train_path, val_path, test_path, embeddings_path, out_path, model_path,
      metrics_path, spec_file, exclude_csv, preset;
  std::uint64_t seed = 0;
  int ways = 0, shots = 0, queries = 0, threads = 0, episodes = 0, epochs = 0, patience = 0, conversations = 0,
      labels = 0;
  std::size_t max_len = 0;
  double lr = 0, lambda = -1, tol = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "json config file; flags override its values");
    sub->add_option("--seed", seed, "run seed (fallback: PROTOSEQ_SEED env var)");
    sub->add_option("--variant", variant, "model variant");
    sub->add_option("--train", train_path, "training corpus (jsonl)");
    sub->add_option("--val", val_path, "validation corpus (jsonl)");
    sub->add_option("--test", test_path, "test corpus (jsonl)");
    sub->add_option("--embeddings", embeddings_path, "pretrained word-vector file (text format)");
    sub->add_option("--out", out_path, "output directory (train/eval) or file (synth/sample)");
    sub->add_option("--episodes", episodes, "test episodes");
    sub->add_option("--ways", ways, "classes per episode (0 = full label set)");
    sub->add_option("--shots", shots, "support conversations per class");
    sub->add_option("--queries", queries, "query conversations per class");
    sub->add_option("--max-len", max_len, "conversation length cap (pad/trim)");
    sub->add_option("--exclude", exclude_csv, "labels excluded from micro/weighted F1, comma-separated");
    sub->add_option("--threads", threads, "evaluation threads");
  };

  CLI::App* cmd_train = app.add_subcommand("train", "train a model and evaluate it on the test split");
  add_common(cmd_train);
  cmd_train->add_option("--lr", lr, "Adam learning rate");
  cmd_train->add_option("--epochs", epochs, "maximum epochs");
  cmd_train->add_option("--patience", patience, "early-stopping patience (epochs)");

  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a saved model");
  add_common(cmd_eval);
  cmd_eval->add_option("--model", model_path, "saved model file");

  CLI::App* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check on episode_loss");
  add_common(cmd_gradcheck);
  cmd_gradcheck->add_option("--tol", tol, "max relative error tolerance");

  CLI::App* cmd_sample = app.add_subcommand("sample", "dump one sampled episode as jsonl");
  add_common(cmd_sample);

  CLI::App* cmd_synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(cmd_synth);
  cmd_synth->add_option("--preset", preset, "separable | transition");
  cmd_synth->add_option("--spec", spec_file, "full synth spec (json file); overrides --preset");
  cmd_synth->add_option("--conversations", conversations, "number of conversations");
  cmd_synth->add_option("--labels", labels, "number of labels (separable preset)");
  cmd_synth->add_option("--lambda", lambda, "label-lexicon emission probability");

  CLI::App* cmd_report = app.add_subcommand("report", "render a metrics.json file as a table");
  add_common(cmd_report);
  cmd_report->add_option("--metrics", metrics_path, "metrics json file");

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  try {
    json cfg = default_config();
    bool config_has_seed = false;
    if (sub->count("--config")) {
      json file_cfg = load_json_file(config_path);
      config_has_seed = file_cfg.contains("seed");
      merge_json(cfg, file_cfg);
    }

    // flags win over config values
    if (sub->count("--variant")) cfg["variant"] = variant;
    if (sub->count("--seed"))
      cfg["seed"] = seed;
    else if (!config_has_seed) {
      if (const char* env = std::getenv("PROTOSEQ_SEED")) cfg["seed"] = std::strtoull(env, nullptr, 10);
    }
    if (sub->count("--train")) cfg["paths"]["train"] = train_path;
    if (sub->count("--val")) cfg["paths"]["val"] = val_path;
    if (sub->count("--test")) cfg["paths"]["test"] = test_path;
    if (sub->count("--embeddings")) cfg["paths"]["embeddings"] = embeddings_path;
    if (sub->count("--out")) cfg["paths"]["out"] = out_path;
    if (sub->count("--episodes")) cfg["train"]["test_episodes"] = episodes;
    if (sub->count("--ways")) cfg["episode"]["ways"] = ways;
    if (sub->count("--shots")) cfg["episode"]["shots"] = shots;
    if (sub->count("--queries")) cfg["episode"]["queries"] = queries;
    if (sub->count("--max-len")) cfg["episode"]["max_len"] = max_len;
    if (sub->count("--threads")) cfg["threads"] = threads;
    if (sub->count("--exclude")) {
      std::vector<std::string> names;
      std::stringstream ss(exclude_csv);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) names.push_back(item);
      cfg["excluded_labels"] = names;
    }
    if (sub == cmd_train) {
      if (cmd_train->count("--lr")) cfg["train"]["lr"] = lr;
      if (cmd_train->count("--epochs")) cfg["train"]["max_epochs"] = epochs;
      if (cmd_train->count("--patience")) cfg["train"]["patience"] = patience;
    }
    if (sub == cmd_eval && cmd_eval->count("--model")) cfg["paths"]["model"] = model_path;
    if (sub == cmd_gradcheck && cmd_gradcheck->count("--tol")) cfg["gradcheck"]["tol"] = tol;
    if (sub == cmd_synth) {
      if (cmd_synth->count("--preset")) cfg["synth"]["preset"] = preset;
      if (cmd_synth->count("--conversations")) cfg["synth"]["conversations"] = conversations;
      if (cmd_synth->count("--labels")) cfg["synth"]["labels"] = labels;
      if (cmd_synth->count("--lambda")) cfg["synth"]["lambda"] = lambda;
    }
    if (sub == cmd_report && cmd_report->count("--metrics")) cfg["paths"]["metrics"] = metrics_path;

    if (sub == cmd_train) return run_train(cfg);
    if (sub == cmd_eval) return run_eval(cfg);
    if (sub == cmd_gradcheck) return run_gradcheck(cfg);
    if (sub == cmd_sample) return run_sample(cfg);
    if (sub == cmd_synth) return run_synth(cfg, spec_file);
    if (sub == cmd_report) return run_report(cfg);
    std::cerr << "error: unknown subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
