#include "dkg/config.hpp"

#include <cstdlib>
#include <fstream>

#include <spdlog/spdlog.h>

#include "dkg/error.hpp"

namespace dkg {

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(Errc::Validation, std::string("invalid number for ") + what + ": '" + s + "'");
    }
}

} // namespace

std::string_view to_string(ScorerKind k) { return k == ScorerKind::Llm ? "llm" : "heuristic"; }
std::string_view to_string(GeneratorKind k) { return k == GeneratorKind::Llm ? "llm" : "deterministic"; }

ScorerKind parse_scorer_kind(std::string_view s) {
    if (s == "heuristic") return ScorerKind::Heuristic;
    if (s == "llm") return ScorerKind::Llm;
    fail(Errc::Validation, "unknown scorer: " + std::string(s));
}

GeneratorKind parse_generator_kind(std::string_view s) {
    if (s == "deterministic") return GeneratorKind::Deterministic;
    if (s == "llm") return GeneratorKind::Llm;
    fail(Errc::Validation, "unknown generator: " + std::string(s));
}

std::filesystem::path default_data_dir() {
#ifdef DKG_DATA_ROOT
    return DKG_DATA_ROOT;
#else
    return "data";
#endif
}

std::filesystem::path AppConfig::resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : data_dir / p;
}

void AppConfig::validate() const {
    scorer.validate();
    FilterThreshold check(tau_default);
    if (top_k_default < 1) fail(Errc::Validation, "top_k_default must be >= 1");
    if (scoring_threads < 1) fail(Errc::Validation, "scoring_threads must be >= 1");
    if (llm_retries < 0) fail(Errc::Validation, "llm_retries must be >= 0");
    if (llm.max_in_flight < 1) fail(Errc::Validation, "llm.max_in_flight must be >= 1");
    if (port < 0 || port > 65535) fail(Errc::Validation, "port out of range");
}

ScorerWeights parse_weights(std::string_view text) {
    std::vector<double> v;
    std::string cur;
    for (char c : std::string(text) + ",") {
        if (c == ',') {
            v.push_back(parse_double(cur, "DKG_SCORER_WEIGHTS"));
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (v.size() != 4) fail(Errc::Validation, "scorer weights need 4 comma-separated values");
    return {v[0], v[1], v[2], v[3]};
}

AppConfig AppConfig::with_env_overrides() const {
    AppConfig c = *this;
    if (auto v = env("DKG_DATA_DIR")) c.data_dir = *v;
    if (auto v = env("DKG_LOG_DIR")) c.log_dir = *v;
    if (auto v = env("DKG_TAU")) c.tau_default = parse_double(*v, "DKG_TAU");
    if (auto v = env("DKG_SCORER_WEIGHTS")) c.scorer.weights = parse_weights(*v);
    if (auto v = env("DKG_SCORER")) c.scorer_kind = parse_scorer_kind(*v);
    if (auto v = env("DKG_GENERATOR")) c.generator = parse_generator_kind(*v);
    if (auto v = env("DKG_API_SECRET")) c.api_secret = *v;
    c.llm = c.llm.with_env_overrides();
    return c;
}

void to_json(json& j, const AppConfig& c) {
    j = json{{"data_dir", c.data_dir.string()},
             {"dictionary", c.dictionary.string()},
             {"static_kg", c.static_kg.string()},
             {"scenarios", c.scenarios.string()},
             {"prompts_dir", c.prompts_dir.string()},
             {"log_dir", c.log_dir ? json(c.log_dir->string()) : json(nullptr)},
             {"static_dir", c.static_dir ? json(c.static_dir->string()) : json(nullptr)},
             {"scorer", c.scorer},
             {"scorer_kind", to_string(c.scorer_kind)},
             {"generator", to_string(c.generator)},
             {"llm",
              {{"base_url", c.llm.base_url},
               {"model", c.llm.model},
               {"timeout_ms", c.llm.timeout_ms},
               {"max_in_flight", c.llm.max_in_flight},
               {"temperature", c.llm.temperature},
               {"retries", c.llm_retries}}},
             {"tau_default", c.tau_default},
             {"top_k_default", c.top_k_default},
             {"scoring_threads", c.scoring_threads},
             {"host", c.host},
             {"port", c.port}};
}

void from_json(const json& j, AppConfig& c) {
    if (!j.is_object()) fail(Errc::Validation, "config must be a JSON object");
    auto path = [&](const char* key, std::filesystem::path& out) {
        if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    auto opt_path = [&](const char* key, std::optional<std::filesystem::path>& out) {
        if (!j.contains(key)) return;
        if (j.at(key).is_null()) {
            out.reset();
        } else {
            out = j.at(key).get<std::string>();
        }
    };
    try {
        path("data_dir", c.data_dir);
        path("dictionary", c.dictionary);
        path("static_kg", c.static_kg);
        path("scenarios", c.scenarios);
        path("prompts_dir", c.prompts_dir);
        opt_path("log_dir", c.log_dir);
        opt_path("static_dir", c.static_dir);
        if (j.contains("scorer")) c.scorer = j.at("scorer").get<ScorerConfig>();
        if (j.contains("scorer_kind")) c.scorer_kind = parse_scorer_kind(j.at("scorer_kind").get<std::string>());
        if (j.contains("generator")) c.generator = parse_generator_kind(j.at("generator").get<std::string>());
        if (j.contains("llm")) {
            const auto& l = j.at("llm");
            c.llm.base_url = l.value("base_url", c.llm.base_url);
            c.llm.model = l.value("model", c.llm.model);
            c.llm.timeout_ms = l.value("timeout_ms", c.llm.timeout_ms);
            c.llm.max_in_flight = l.value("max_in_flight", c.llm.max_in_flight);
            c.llm.temperature = l.value("temperature", c.llm.temperature);
            c.llm_retries = l.value("retries", c.llm_retries);
        }
        c.tau_default = j.value("tau_default", c.tau_default);
        c.top_k_default = j.value("top_k_default", c.top_k_default);
        c.scoring_threads = j.value("scoring_threads", c.scoring_threads);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.api_secret = j.value("api_secret", c.api_secret);
    } catch (const json::exception& e) {
        fail(Errc::Validation, std::string("invalid config: ") + e.what());
    }
}

AppConfig load_config(const std::optional<std::filesystem::path>& path) {
    AppConfig c;
    if (path) {
        std::ifstream in(*path);
        if (!in) fail(Errc::Parse, "cannot open config: " + path->string());
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) fail(Errc::Parse, "config is not valid JSON: " + path->string());
        c = j.get<AppConfig>();
        // A relative data_dir is taken from the config file's location.
        if (c.data_dir.is_relative()) c.data_dir = path->parent_path() / c.data_dir;
    }
    c = c.with_env_overrides();
    c.validate();
    return c;
}

WhatIfRunner Services::whatif() const { return WhatIfRunner(dictionary, static_kg, scorer, generator, qa_options); }

Services build_services(const AppConfig& config, std::shared_ptr<ChatClient> chat) {
    config.validate();
    Services s;
    s.config = config;
    s.dictionary = std::make_shared<const ConceptDictionary>(ConceptDictionary::load(config.resolve(config.dictionary)));
    s.static_kg = std::make_shared<const StaticKg>(StaticKg::load(config.resolve(config.static_kg)));
    const auto prompts = config.resolve(config.prompts_dir);

    const bool wants_llm = config.scorer_kind == ScorerKind::Llm || config.generator == GeneratorKind::Llm;
    if (chat) {
        s.chat = std::move(chat);
    } else if (wants_llm) {
        s.chat = std::make_shared<HttpChatClient>(config.llm);
    }

    if (config.scorer_kind == ScorerKind::Llm) {
        LlmScoringOptions opts;
        opts.retries = config.llm_retries;
        opts.system = PromptTemplate::load_or(prompts / "score_system.txt", prompts::kScoreSystem);
        opts.user = PromptTemplate::load_or(prompts / "score_user.txt", prompts::kScoreUser);
        s.scorer = std::make_shared<LlmScorer>(s.chat, config.scorer, std::move(opts));
    } else {
        s.scorer = std::make_shared<HeuristicScorer>(config.scorer);
    }

    if (config.generator == GeneratorKind::Llm) {
        s.generator = std::make_shared<LlmGenerator>(s.chat);
    } else {
        s.generator = std::make_shared<DeterministicGenerator>();
    }

    s.qa_options.system = PromptTemplate::load_or(prompts / "answer_system.txt", prompts::kAnswerSystem);
    s.qa_options.user = PromptTemplate::load_or(prompts / "answer_user.txt", prompts::kAnswerUser);

    s.store = config.log_dir ? std::make_shared<KgStore>(*config.log_dir) : std::make_shared<KgStore>();
    s.engine = std::make_shared<Engine>(s.dictionary, s.static_kg, s.scorer, s.store,
                                        std::make_shared<GazetteerExtractor>(), config.scoring_threads);
    s.qa = std::make_shared<QaEngine>(s.store, s.dictionary, s.generator, s.qa_options);
    spdlog::debug("services ready: scorer={} generator={} subjects={}", to_string(config.scorer_kind),
                  to_string(config.generator), s.store->list_subjects().size());
    return s;
}

void from_json(const json& j, EvalRequest& r) {
    if (!j.is_object()) fail(Errc::Validation, "eval request must be a JSON object");
    try {
        if (j.contains("records")) r.records = j.at("records").get<std::string>();
        if (j.contains("labels")) r.labels = j.at("labels").get<std::string>();
        r.corpus.seed = j.value("corpus_seed", r.corpus.seed);
        r.corpus.n_subjects = j.value("n_subjects", r.corpus.n_subjects);
        r.corpus.visits_per_subject = j.value("visits", r.corpus.visits_per_subject);
        r.corpus.noise_rate = j.value("noise_rate", r.corpus.noise_rate);
        r.sweep = j.value("sweep", r.sweep);
        if (j.contains("tau") && !j.at("tau").is_null()) r.tau = j.at("tau").get<double>();
        r.runs = j.value("runs", r.runs);
        r.seed = j.value("seed", r.seed);
        if (j.contains("generator")) r.generator = parse_risk_generator(j.at("generator").get<std::string>());
    } catch (const json::exception& e) {
        fail(Errc::Validation, std::string("invalid eval request: ") + e.what());
    }
}

EvalOutcome run_eval(const Services& services, const EvalRequest& request) {
    if (request.records.has_value() != request.labels.has_value()) {
        fail(Errc::Validation, "records and labels must be given together");
    }
    std::vector<SubjectRecord> records;
    std::map<std::string, int> labels;
    if (request.records) {
        records = read_records_jsonl(services.config.resolve(*request.records));
        labels = read_labels(services.config.resolve(*request.labels));
    } else {
        auto corpus = generate_corpus(request.corpus);
        records = std::move(corpus.records);
        labels = std::move(corpus.labels);
    }
    if (request.generator == RiskGenerator::Llm && !services.chat) {
        fail(Errc::Validation, "the llm risk generator needs an LLM endpoint");
    }

    auto store = std::make_shared<KgStore>();
    Engine engine(services.dictionary, services.static_kg, services.scorer, store,
                  std::make_shared<GazetteerExtractor>(), services.config.scoring_threads);
    engine.ingest_all(records);

    PredictionTask task;
    for (const auto& [s, _] : labels) task.subject_ids.push_back(s);
    task.labels = labels;
    task.runs = request.runs;
    task.seed = request.seed;
    task.predictor.generator = request.generator;
    task.predictor.risk_concepts = default_risk_concepts();

    const auto prompts = services.config.resolve(services.config.prompts_dir);
    RiskPredictor predictor(services.chat, PromptTemplate::load_or(prompts / "risk_system.txt", prompts::kRiskSystem),
                            PromptTemplate::load_or(prompts / "risk_user.txt", prompts::kRiskUser));

    EvalOutcome out;
    if (request.sweep) {
        out.rows = run_sweep(task, default_tau_grid(), *store, predictor);
    } else {
        const double tau = FilterThreshold(request.tau.value_or(services.config.tau_default)).value();
        out.rows = run_sweep(task, {tau}, *store, predictor);
    }
    out.csv = sweep_csv(out.rows);
    out.report = sweep_json(out.rows);
    out.report["generator"] = to_string(request.generator);
    out.report["runs"] = request.runs;
    return out;
}

} // namespace dkg
