#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "protovae/model/vae.hpp"

namespace protovae::model {

// Binary checkpoint, little-endian:
//   "PVCKPT\0" + u8 version
//   TrainConfig fields, then a free-form config echo string (JSON from the cli)
//   u64 epoch count, per epoch: u64 epoch, f64 beta, f64 x4 breakdown
//   u32 tensor count, per tensor: name, u32 rank, u64 dims, f64 values
struct Checkpoint {
    TrainConfig config;
    std::string config_echo;
    ModelParams params;
    std::vector<EpochStats> trace;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace protovae::model
