#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mrgt/datamodel.hpp"
#include "mrgt/model.hpp"
#include "mrgt/trainer.hpp"

namespace mrgt {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Binary layout (all integers little-endian):
///   "MRGT" | u16 version | u32 len + config JSON | u64 epoch | u64 optimizer step
///   | u32 len + RNG state | u32 entry count
///   | entries: u16 name len, name, u8 kind (0 value, 1 first moment, 2 second
///     moment), u32 rows, u32 cols, u64 byte offset into the blob section
///   | blob section: raw little-endian f64 data
struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    Vocabulary vocab;
    std::vector<std::string> names;
    std::vector<Matrix> values;
    AdamState optimizer;
    std::uint64_t epoch = 0;
    std::string rng_state;
};

Checkpoint make_checkpoint(const MrgtModel& model, const Vocabulary& vocab, const TrainConfig& train,
                           const AdamState& optimizer, std::uint64_t epoch, const std::string& rng_state);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model and copies the stored values in by name.
MrgtModel restore_model(const Checkpoint& ckpt);

bool same_state(const Checkpoint& a, const Checkpoint& b);

} // namespace mrgt
