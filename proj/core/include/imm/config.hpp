#pragma once

#include <cstdint>
#include <string>

#include "imm/data.hpp"
#include "imm/head.hpp"
#include "imm/kernel.hpp"
#include "imm/mapping.hpp"
#include "imm/sampler.hpp"
#include "imm/schedule.hpp"
#include "imm/train.hpp"

namespace imm {

// Everything a run needs, in one aggregate.  The text form is a small INI
// dialect: `[section]` headers, `key=value` lines, full-line comments starting
// with '#' or ';'.  Unknown sections or keys are rejected so that typos in a
// config cannot silently fall back to defaults.
struct RunConfig {
    FlowSchedule sched;
    HeadConfig head;
    KernelSpec kernel;
    MappingFn mapping;
    WeightConfig weight;  // lives in the [train] section of the text form
    TrainConfig train;
    SamplerSchedule sampler;
    DatasetKind data = DatasetKind::GaussRing8;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
};

// Defaults matching the shipped training recipe for the 2-D datasets.
RunConfig default_config();

// Parses the INI text form.  Throws DomainError on unknown keys, malformed
// lines, or unparsable values.  Fields not mentioned keep their defaults.
RunConfig parse_config(const std::string& text);

// Canonical serialization: fixed section and key order, shortest
// round-trippable number format.  parse_config(serialize_config(c)) recovers
// every field, and serialize is a fixed point on parsed output.
std::string serialize_config(const RunConfig& cfg);

// Cross-module validation of a parsed config (schedule invariants, mapping
// bounds resolvable, head/schedule compatibility, sampler grid constructible).
void validate_config(const RunConfig& cfg);

// Enum <-> lowercase token maps, shared by the parser, the serializer, and
// the CLI surface.
std::string to_token(ScheduleKind k);
std::string to_token(HeadKind k);
std::string to_token(KernelKind k);
std::string to_token(MappingKind k);
std::string to_token(WeightKind k);
std::string to_token(GridKind k);
std::string to_token(DatasetKind k);

ScheduleKind schedule_kind_from(const std::string& s);
HeadKind head_kind_from(const std::string& s);
KernelKind kernel_kind_from(const std::string& s);
MappingKind mapping_kind_from(const std::string& s);
WeightKind weight_kind_from(const std::string& s);
GridKind grid_kind_from(const std::string& s);
DatasetKind dataset_kind_from(const std::string& s);

}  // namespace imm
