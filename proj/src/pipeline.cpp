#include "cape/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "cape/manifold.hpp"
#include "cape/propbench.hpp"
#include "cape/rng.hpp"
#include "cape/rotary.hpp"
#include "cape/synthgen.hpp"

namespace cape {

using nlohmann::json;

namespace {

// fixed per-stage seed streams
enum Stage : std::uint64_t {
    kSynthSeed = 1,
    kDiscoverSeed = 2,
    kEmbedSeed = 3,
    kCodebookSeed = 4,
    kProjectionSeed = 5,
    kValidateSeed = 6,
};

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& scope) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok |= (key == a);
        if (!ok) throw std::runtime_error("config: unknown key '" + scope + key + "'");
    }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

} // namespace

void PipelineConfig::validate() const {
    if (attention.D != 2 * embedding.d) {
        std::ostringstream msg;
        msg << "config: attention.D (" << attention.D << ") must equal 2 * embedding.d ("
            << embedding.d << "); the rotary pairing requires D = 2d";
        throw std::runtime_error(msg.str());
    }
    if (synth.M < 2) throw std::runtime_error("config: synth.M must be >= 2");
    if (synth.m_attach < 1 || synth.m_attach >= synth.M)
        throw std::runtime_error("config: need 1 <= synth.m_attach < synth.M");
    if (discovery.lambda_s < 0.0) throw std::runtime_error("config: discovery.lambda_s < 0");
    if (discovery.tau <= 0.0) throw std::runtime_error("config: discovery.tau must be > 0");
    if (discovery.rho0 <= 0.0) throw std::runtime_error("config: discovery.rho0 must be > 0");
    if (discovery.rho_growth <= 1.0)
        throw std::runtime_error("config: discovery.rho_growth must be > 1");
    if (discovery.h_decrease <= 0.0 || discovery.h_decrease >= 1.0)
        throw std::runtime_error("config: discovery.h_decrease must be in (0,1)");
    if (embedding.d < 2) throw std::runtime_error("config: embedding.d must be >= 2");
    if (embedding.lambda_g < 0.0) throw std::runtime_error("config: embedding.lambda_g < 0");
    if (embedding.k < 1) throw std::runtime_error("config: embedding.k must be >= 1");
    if (embedding.w <= 0.0 || embedding.w >= 1.0)
        throw std::runtime_error("config: embedding.w must be in (0,1)");
    if (embedding.eta <= 0.0) throw std::runtime_error("config: embedding.eta must be > 0");
    if (attention.D % 2 != 0) throw std::runtime_error("config: attention.D must be even");
    if (attention.B < 1) throw std::runtime_error("config: attention.B must be >= 1");
}

PipelineConfig config_from_json_text(const std::string& text) {
    json j = json::parse(text);
    PipelineConfig cfg;
    reject_unknown(j, {"seed", "synth", "discovery", "embedding", "attention"}, "");
    maybe(j, "seed", cfg.seed);
    if (j.contains("synth")) {
        const json& s = j["synth"];
        reject_unknown(s, {"M", "m_attach", "N", "weight_lo", "weight_hi", "sem_hidden"},
                       "synth.");
        maybe(s, "M", cfg.synth.M);
        maybe(s, "m_attach", cfg.synth.m_attach);
        maybe(s, "N", cfg.synth.N);
        maybe(s, "weight_lo", cfg.synth.weight_lo);
        maybe(s, "weight_hi", cfg.synth.weight_hi);
        maybe(s, "sem_hidden", cfg.synth.sem_hidden);
    }
    if (j.contains("discovery")) {
        const json& d = j["discovery"];
        reject_unknown(d,
                       {"lambda_s", "tau", "rho0", "alpha0", "rho_growth", "rho_cap",
                        "h_decrease", "outer_iterations", "inner_epochs", "batch_size",
                        "learning_rate", "hidden", "low_rank", "h_tol"},
                       "discovery.");
        maybe(d, "lambda_s", cfg.discovery.lambda_s);
        maybe(d, "tau", cfg.discovery.tau);
        maybe(d, "rho0", cfg.discovery.rho0);
        maybe(d, "alpha0", cfg.discovery.alpha0);
        maybe(d, "rho_growth", cfg.discovery.rho_growth);
        maybe(d, "rho_cap", cfg.discovery.rho_cap);
        maybe(d, "h_decrease", cfg.discovery.h_decrease);
        maybe(d, "outer_iterations", cfg.discovery.outer_iterations);
        maybe(d, "inner_epochs", cfg.discovery.inner_epochs);
        maybe(d, "batch_size", cfg.discovery.batch_size);
        maybe(d, "learning_rate", cfg.discovery.learning_rate);
        maybe(d, "hidden", cfg.discovery.hidden);
        maybe(d, "low_rank", cfg.discovery.low_rank);
        maybe(d, "h_tol", cfg.discovery.h_tol);
    }
    if (j.contains("embedding")) {
        const json& e = j["embedding"];
        reject_unknown(e, {"d", "lambda_g", "k", "w", "eta", "epochs", "max_negatives"},
                       "embedding.");
        maybe(e, "d", cfg.embedding.d);
        maybe(e, "lambda_g", cfg.embedding.lambda_g);
        maybe(e, "k", cfg.embedding.k);
        maybe(e, "w", cfg.embedding.w);
        maybe(e, "eta", cfg.embedding.eta);
        maybe(e, "epochs", cfg.embedding.epochs);
        maybe(e, "max_negatives", cfg.embedding.max_negatives);
        cfg.attention.D = 2 * cfg.embedding.d; // default tracks d unless set below
    }
    if (j.contains("attention")) {
        const json& a = j["attention"];
        reject_unknown(a, {"D", "B", "scale_scores", "aggregate_max"}, "attention.");
        maybe(a, "D", cfg.attention.D);
        maybe(a, "B", cfg.attention.B);
        maybe(a, "scale_scores", cfg.attention.scale_scores);
        maybe(a, "aggregate_max", cfg.attention.aggregate_max);
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json_text(const PipelineConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["synth"] = {{"M", cfg.synth.M},
                  {"m_attach", cfg.synth.m_attach},
                  {"N", cfg.synth.N},
                  {"weight_lo", cfg.synth.weight_lo},
                  {"weight_hi", cfg.synth.weight_hi},
                  {"sem_hidden", cfg.synth.sem_hidden}};
    j["discovery"] = {{"lambda_s", cfg.discovery.lambda_s},
                      {"tau", cfg.discovery.tau},
                      {"rho0", cfg.discovery.rho0},
                      {"alpha0", cfg.discovery.alpha0},
                      {"rho_growth", cfg.discovery.rho_growth},
                      {"rho_cap", cfg.discovery.rho_cap},
                      {"h_decrease", cfg.discovery.h_decrease},
                      {"outer_iterations", cfg.discovery.outer_iterations},
                      {"inner_epochs", cfg.discovery.inner_epochs},
                      {"batch_size", cfg.discovery.batch_size},
                      {"learning_rate", cfg.discovery.learning_rate},
                      {"hidden", cfg.discovery.hidden},
                      {"low_rank", cfg.discovery.low_rank},
                      {"h_tol", cfg.discovery.h_tol}};
    j["embedding"] = {{"d", cfg.embedding.d},
                      {"lambda_g", cfg.embedding.lambda_g},
                      {"k", cfg.embedding.k},
                      {"w", cfg.embedding.w},
                      {"eta", cfg.embedding.eta},
                      {"epochs", cfg.embedding.epochs},
                      {"max_negatives", cfg.embedding.max_negatives}};
    j["attention"] = {{"D", cfg.attention.D},
                      {"B", cfg.attention.B},
                      {"scale_scores", cfg.attention.scale_scores},
                      {"aggregate_max", cfg.attention.aggregate_max}};
    return j.dump(2) + "\n";
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
    open_out(path) << config_to_json_text(cfg);
}

void run_synth(const PipelineConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::uint64_t seed = SeededRng::derive(cfg.seed, kSynthSeed);
    WeightedDag dag = gen_ba_dag(cfg.synth.M, cfg.synth.m_attach, SeededRng::derive(seed, 0));
    dag = assign_weights(std::move(dag), cfg.synth.weight_lo, cfg.synth.weight_hi,
                         SeededRng::derive(seed, 1));
    SemOptions opts;
    opts.hidden = cfg.synth.sem_hidden;
    const DenseMatrix data = simulate_sem(dag, cfg.synth.N, SeededRng::derive(seed, 2), opts);

    write_csv(dag.adjacency, out_dir + "/dag_true.csv");
    write_csv(data, out_dir + "/data.csv");
    json meta = {{"seed", cfg.seed},
                 {"stage_seed", seed},
                 {"M", cfg.synth.M},
                 {"N", cfg.synth.N},
                 {"m_attach", cfg.synth.m_attach},
                 {"weight_lo", cfg.synth.weight_lo},
                 {"weight_hi", cfg.synth.weight_hi},
                 {"sem_hidden", cfg.synth.sem_hidden}};
    open_out(out_dir + "/meta.json") << meta.dump(2) << "\n";
}

void run_discover(const PipelineConfig& cfg, const std::string& out_dir) {
    const DenseMatrix data = read_csv(out_dir + "/data.csv");
    const std::uint64_t seed = SeededRng::derive(cfg.seed, kDiscoverSeed);
    const DiscoveryResult res = augmented_lagrangian_fit(data, cfg.discovery, seed);
    const CausalGraph graph = threshold_graph(res.model, cfg.discovery.tau);

    write_csv(res.model.A, out_dir + "/A_raw.csv");
    write_csv(graph.adjacency, out_dir + "/A_thresholded.csv");

    json metrics = {{"stage_seed", seed},
                    {"final_h", res.final_h},
                    {"final_loss", res.final_loss},
                    {"converged", res.converged},
                    {"loss_history", res.loss_history},
                    {"h_history", res.h_history},
                    {"edges", graph.edges.size()}};
    if (std::filesystem::exists(out_dir + "/dag_true.csv")) {
        WeightedDag truth;
        truth.adjacency = read_csv(out_dir + "/dag_true.csv");
        truth.M = truth.adjacency.rows();
        metrics["shd"] = shd(graph, truth);
    }
    open_out(out_dir + "/discovery_metrics.json") << metrics.dump(2) << "\n";
}

namespace {

CausalGraph load_graph(const std::string& out_dir) {
    CausalGraph g;
    g.adjacency = read_csv(out_dir + "/A_thresholded.csv");
    g.M = g.adjacency.rows();
    for (std::size_t i = 0; i < g.M; ++i)
        for (std::size_t j = 0; j < g.M; ++j)
            if (g.adjacency(i, j) != 0.0) g.edges.push_back({i, j, g.adjacency(i, j)});
    return g;
}

} // namespace

void run_embed(const PipelineConfig& cfg, const std::string& out_dir) {
    const CausalGraph graph = load_graph(out_dir);
    EmbeddingConfig ecfg = cfg.embedding;
    ecfg.seed = SeededRng::derive(cfg.seed, kEmbedSeed);
    const HyperboloidEmbedding emb = fit_embeddings(graph, ecfg);

    DenseMatrix hyper(graph.M, ecfg.d + 1), ball(graph.M, ecfg.d);
    for (std::size_t m = 0; m < graph.M; ++m) {
        const std::vector<double> e = to_poincare(emb.points[m]);
        for (std::size_t c = 0; c <= ecfg.d; ++c) hyper(m, c) = emb.points[m][c];
        for (std::size_t c = 0; c < ecfg.d; ++c) ball(m, c) = e[c];
    }
    write_csv(hyper, out_dir + "/embedding_hyperboloid.csv");
    write_csv(ball, out_dir + "/embedding_poincare.csv");
    DenseMatrix pr(graph.M, 1);
    for (std::size_t m = 0; m < graph.M; ++m) pr(m, 0) = emb.pi[m];
    write_csv(pr, out_dir + "/pagerank.csv");

    json metrics = {{"stage_seed", ecfg.seed},
                    {"epochs", ecfg.epochs},
                    {"final_loss", emb.loss_history.empty() ? 0.0 : emb.loss_history.back()},
                    {"loss_history_head",
                     std::vector<double>(emb.loss_history.begin(),
                                         emb.loss_history.begin() +
                                             std::min<std::size_t>(emb.loss_history.size(), 10))}};
    open_out(out_dir + "/embed_metrics.json") << metrics.dump(2) << "\n";
}

void run_encode(const PipelineConfig& cfg, const std::string& out_dir) {
    (void)cfg;
    const DenseMatrix ball = read_csv(out_dir + "/embedding_poincare.csv");
    DenseMatrix angles(ball.rows(), ball.cols());
    for (std::size_t m = 0; m < ball.rows(); ++m) {
        std::vector<double> e(ball.cols());
        for (std::size_t c = 0; c < ball.cols(); ++c) e[c] = ball(m, c);
        const std::vector<double> phi = angles_from_poincare(e);
        for (std::size_t c = 0; c < ball.cols(); ++c) angles(m, c) = phi[c];
    }
    write_csv(angles, out_dir + "/angles.csv");
}

void run_attend(const PipelineConfig& cfg, const std::string& out_dir) {
    const DenseMatrix data = read_csv(out_dir + "/data.csv");
    const DenseMatrix angle_mat = read_csv(out_dir + "/angles.csv");
    const std::size_t m = angle_mat.rows();
    const std::size_t d_width = cfg.attention.D;
    if (data.cols() != m) throw std::runtime_error("run_attend: data/angle feature mismatch");
    if (angle_mat.cols() * 2 != d_width)
        throw std::runtime_error("run_attend: attention.D must be twice the angle dimension");

    const Codebook cb = make_codebook(quantile_edges(data, cfg.attention.B), d_width,
                                      SeededRng::derive(cfg.seed, kCodebookSeed));
    SeededRng proj_rng(SeededRng::derive(cfg.seed, kProjectionSeed));
    DenseMatrix w_q(d_width, d_width), w_k(d_width, d_width), w_v(d_width, d_width);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_width));
    for (double& v : w_q.data()) v = proj_rng.normal() * scale;
    for (double& v : w_k.data()) v = proj_rng.normal() * scale;
    for (double& v : w_v.data()) v = proj_rng.normal() * scale;

    std::vector<std::vector<double>> angles(m, std::vector<double>(angle_mat.cols()));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < angle_mat.cols(); ++c) angles[i][c] = angle_mat(i, c);

    DenseMatrix mean_attention(m, m);
    DenseMatrix obs(data.rows(), d_width);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        std::vector<double> row(m);
        for (std::size_t j = 0; j < m; ++j) row[j] = data(r, j);
        const DenseMatrix emb = contextual_embed(cb, row);
        const AttentionOutput out =
            attention_layer(emb, angles, w_q, w_k, w_v, cfg.attention.scale_scores);
        mean_attention += out.attention;
        const std::vector<double> agg = aggregate(out.outputs, cfg.attention.aggregate_max);
        for (std::size_t c = 0; c < d_width; ++c) obs(r, c) = agg[c];
    }
    mean_attention *= 1.0 / static_cast<double>(data.rows());
    write_csv(mean_attention, out_dir + "/attention_matrix.csv");
    write_csv(obs, out_dir + "/observation_embeddings.csv");
}

bool run_validate(const PipelineConfig& cfg, const std::string& out_dir) {
    return run_property_bench(out_dir, SeededRng::derive(cfg.seed, kValidateSeed));
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

bool run_pipeline(const PipelineConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    struct StageEntry {
        std::string name;
        double seconds;
    };
    std::vector<StageEntry> timings;
    bool validate_pass = true;

    const auto timed = [&](const std::string& name, auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        timings.push_back({name, std::chrono::duration<double>(t1 - t0).count()});
    };

    timed("synth", [&] { run_synth(cfg, out_dir); });
    timed("discover", [&] { run_discover(cfg, out_dir); });
    timed("embed", [&] { run_embed(cfg, out_dir); });
    timed("encode", [&] { run_encode(cfg, out_dir); });
    timed("attend", [&] { run_attend(cfg, out_dir); });
    timed("validate", [&] { validate_pass = run_validate(cfg, out_dir); });

    json manifest;
    manifest["seed"] = cfg.seed;
    manifest["validate_pass"] = validate_pass;
    json stages = json::array();
    for (const auto& t : timings) stages.push_back({{"stage", t.name}, {"seconds", t.seconds}});
    manifest["stages"] = stages;
    json hashes;
    for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json") continue;
        hashes[name] = file_hash(entry.path().string());
    }
    manifest["files"] = hashes;
    open_out(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
    return validate_pass;
}

} // namespace cape
