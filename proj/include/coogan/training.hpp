#pragma once

#include <string>
#include <vector>

#include "coogan/data.hpp"
#include "coogan/losses.hpp"
#include "coogan/networks.hpp"

namespace coogan {

struct TrainConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.99;
    double decay_rate = 0.1;
    int decay_epoch = 100;
    int n_critic = 5;
    int batch_size = 16;
    int epochs = 1;
    int steps_per_epoch = 0;  // 0: one pass over the training split per epoch
    LossWeights loss_weights;
    std::uint64_t seed = 0;
    int sample_every = 0;  // save a sample grid every N generator steps (0 = off)

    void validate() const {
        if (!(lr > 0)) throw config_error("TrainConfig: lr must be positive");
        if (n_critic < 1) throw config_error("TrainConfig: n_critic must be >= 1");
        if (batch_size < 1 || epochs < 1) throw config_error("TrainConfig: bad batch/epochs");
        loss_weights.validate();
    }
};

// lr * decay_rate^floor(epoch / decay_epoch)
double lr_schedule(int epoch, const TrainConfig& cfg);

struct LossRecord {
    i64 step;
    std::string name;
    double value;
};

struct TrainResult {
    std::vector<LossRecord> log;
    // checkpoint directories, empty when out_dir was empty
    std::string generator_dir;
    std::string discriminator_dir;
};

// Stage 1: adversarial training of (G_g, D_g) on LR images with labels.
// n_critic critic updates per generator update; target attribute vectors are
// drawn by shuffling source labels within the batch. Deterministic under
// cfg.seed. Images train at dspec.input_size.
TrainResult train_global(Generator& g, Discriminator& d, const ImageFolderDataset& ds,
                         const TrainConfig& cfg, const std::string& out_dir);

// Stage 2: G_g stays frozen; (G_l, D_l) train on HR patches built through the
// cooperation path. hr_size/patch size come from cfg_run; the LR side uses
// cfg_run.global_size.
TrainResult train_local(Generator& g_local, Discriminator& d_local, const Generator& g_global,
                        const ImageFolderDataset& hq_ds, const RunConfig& cfg_run,
                        const TrainConfig& cfg, const std::string& out_dir);

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& log);

// TrainConfig <-> JSON config file (flags can override individual fields).
TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);

}  // namespace coogan
