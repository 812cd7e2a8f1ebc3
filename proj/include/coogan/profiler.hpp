#pragma once

#include <string>
#include <vector>

#include "coogan/core.hpp"
#include "coogan/networks.hpp"

namespace coogan {

// FLOP conventions used throughout: one multiply-accumulate = 2 FLOPs;
// convolutions cost 2*k^2*Cin*Cout per output position, transpose
// convolutions the same per *input* position; elementwise ops cost one FLOP
// per element (instance norm 5 per element); concatenation is free.

struct LayerProfile {
    std::string name;
    i64 params = 0;
    i64 flops = 0;
};

struct ProfileReport {
    std::string model;
    i64 input_size = 0;
    std::vector<LayerProfile> layers;
    i64 total_params = 0;
    i64 total_flops = 0;
    i64 param_bytes = 0;             // float32
    i64 activation_peak_bytes = 0;   // float32, batch 1, inference liveness
    i64 peak_bytes = 0;              // params + activation peak
};

i64 count_params(const nn::ParamMap& pm);
i64 count_params(const Generator& g);
i64 count_params(const Discriminator& d);

i64 conv_flops(int k, i64 cin, i64 cout, i64 out_h, i64 out_w);
i64 tconv_flops(int k, i64 cin, i64 cout, i64 in_h, i64 in_w);
i64 unit_flops(UnitKind kind, const UnitSpec& spec, i64 feature_size);

ProfileReport profile_generator(const GeneratorSpec& spec, i64 input_size);

// Liveness-simulated activation peak of one generator pass (batch 1,
// float32), excluding weights.
i64 generator_activation_peak_bytes(const GeneratorSpec& spec, i64 input_size);

// --- skip-connection comparison (five-layer doubling schedule) -------------

struct UnitScheduleProfile {
    UnitKind kind = UnitKind::lstu;
    i64 base = 16;
    i64 params = 0;
    i64 flops = 0;
};

// Units on layers 1..n_layers-1 of a doubling schedule starting at `base`.
UnitScheduleProfile profile_unit_schedule(UnitKind kind, i64 base, int n_layers, i64 n_attrs,
                                          i64 input_size);

// Input size whose 16-channel LSTU schedule FLOPs best matches the published
// 2.02 GFLOPs cell; recorded in every unit report.
i64 calibrate_unit_table_input();

std::string unit_table_markdown(const std::vector<i64>& bases, int n_layers, i64 n_attrs,
                                i64 input_size);
void unit_table_csv(const std::string& path, const std::vector<i64>& bases, int n_layers,
                    i64 n_attrs, i64 input_size);

// --- pipeline memory -------------------------------------------------------

struct PipelineProfile {
    std::string name;
    i64 param_bytes = 0;
    i64 activation_peak_bytes = 0;
    i64 peak_bytes = 0;
    std::string note;
};

// Peak = both generators' parameters resident + the larger of the two pass
// peaks (global pass at cfg.global_size, one patch pass at cfg.patch_size).
// The HR frame itself streams through tiling and is not model activation.
PipelineProfile profile_coogan_pipeline(const GeneratorSpec& global_spec,
                                        const GeneratorSpec& local_spec, const RunConfig& cfg);
PipelineProfile profile_monolithic_pipeline(const GeneratorSpec& spec, i64 hr_size);

std::string memory_report_markdown(const PipelineProfile& coogan, const PipelineProfile& mono);

}  // namespace coogan
