#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace ssod::cli {

// One entry point per subcommand. Each reads its inputs, writes its outputs
// and throws ssod::Error (or a subclass) on failure. An empty config path
// falls back to SSOD_CONFIG and then to the built-in defaults.

struct SimulateArgs {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
};

struct TeacherArgs {
    std::string config;
    std::string scenes;
    std::uint64_t seed = 0;
    std::string out;
};

struct PseudolabelArgs {
    std::string preds;
    double p = 35.0;
    double floor = 0.5;
    std::string out;
    std::string report;
};

struct AssignArgs {
    std::string pseudo;
    std::string config;
    std::size_t k = 2;
    bool baseline_iou = false;
    std::string out;
};

struct NegativesArgs {
    std::string preds;
    std::string assign;
    double bg_thr = 0.7;
    double s_max = 0.5;
    std::string out;
};

struct EvaluateArgs {
    std::string preds;
    std::string gt;
    double iou = 0.5;
    std::string out;
};

struct PipelineArgs {
    std::string config;
    std::size_t iters = 1;
    std::uint64_t seed = 0;
    std::string out;
};

void simulate(const SimulateArgs& args);
void teacher(const TeacherArgs& args);
void pseudolabel(const PseudolabelArgs& args);
void assign(const AssignArgs& args);
void negatives(const NegativesArgs& args);
void evaluate(const EvaluateArgs& args);
void pipeline(const PipelineArgs& args);

}  // namespace ssod::cli
