#pragma once

#include <cstdint>
#include <string>

#include "cape/attnlayer.hpp"
#include "cape/discovery.hpp"
#include "cape/embed.hpp"

namespace cape {

struct SynthConfig {
    std::size_t M = 10;
    std::size_t m_attach = 1;
    std::size_t N = 5000;
    double weight_lo = 0.5;
    double weight_hi = 2.0;
    std::size_t sem_hidden = 16;
};

struct PipelineConfig {
    std::uint64_t seed = 7;
    SynthConfig synth;
    DiscoveryConfig discovery;
    EmbeddingConfig embedding;
    AttentionConfig attention;

    void validate() const; // cross-module constraints (D = 2d, ranges)
};

PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& cfg, const std::string& path);
PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const PipelineConfig& cfg);

/// Individual stages; each reads its inputs from and writes its artifacts to
/// out_dir. Stage seeds are derived from cfg.seed so stages are independently
/// reproducible.
void run_synth(const PipelineConfig& cfg, const std::string& out_dir);
void run_discover(const PipelineConfig& cfg, const std::string& out_dir);
void run_embed(const PipelineConfig& cfg, const std::string& out_dir);
void run_encode(const PipelineConfig& cfg, const std::string& out_dir);
void run_attend(const PipelineConfig& cfg, const std::string& out_dir);
bool run_validate(const PipelineConfig& cfg, const std::string& out_dir);

/// All stages in order plus manifest.json (stage timings, seeds, file
/// hashes). Returns false when the property bench reported a failure.
bool run_pipeline(const PipelineConfig& cfg, const std::string& out_dir);

/// FNV-1a 64-bit hash of a file's bytes, as a hex string.
std::string file_hash(const std::string& path);

} // namespace cape
