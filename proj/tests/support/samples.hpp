#pragma once

// Loading the bundled sample patches.

#include <string>

#include "patchprobe/pipeline.hpp"

namespace patchprobe::reference {

inline std::string sample_path(const std::string& rel) { return std::string(PATCHPROBE_SAMPLES) + "/" + rel; }

inline std::string sample(const std::string& rel) { return read_file(sample_path(rel)); }

/// Signature file of sample `name` from its MIR or x86 reference builds.
inline SignatureFile extract_sample(const std::string& name, InputKind kind = InputKind::Mir, const PipelineConfig& cfg = {}) {
    const std::string ext = kind == InputKind::Mir ? ".mir" : ".x86";
    const std::string lines = kind == InputKind::Mir ? ".lines" : ".x86.lines";
    ExtractInputs in;
    in.patch_id = name;
    in.kind = kind;
    in.vuln_text = sample(name + "/vuln" + ext);
    in.patched_text = sample(name + "/patched" + ext);
    in.diff_text = sample(name + "/fix.diff");
    in.linemap_vuln_text = sample(name + "/vuln" + lines);
    in.linemap_patched_text = sample(name + "/patched" + lines);
    in.tables = parse_side_tables(sample(name + "/sidetables.json"));
    return extract(in, cfg);
}

inline Status test_sample(const SignatureFile& sf, const std::string& name, const std::string& target,
                          InputKind kind = InputKind::Mir, const PipelineConfig& cfg = {}) {
    const SideTables t = parse_side_tables(sample(name + "/sidetables.json"));
    return test_target({sf}, sample(name + "/" + target), kind, cfg, &t).verdict.status;
}

} // namespace patchprobe::reference
