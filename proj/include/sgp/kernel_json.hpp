#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sgp/kernel.hpp"

namespace sgp {

// The on-disk kernel description: hyperparameter slots (names + bounds) plus
// the kernel tree. Schema "sgp.kernel/1".
struct KernelDocument {
  ParameterSpace space;
  KernelSpec spec;
};

nlohmann::json slots_to_json(const ParameterSpace& space);
ParameterSpace slots_from_json(const nlohmann::json& j);

nlohmann::json kernel_spec_to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

nlohmann::json kernel_document_to_json(const KernelDocument& doc);
KernelDocument kernel_document_from_json(const nlohmann::json& j);

KernelDocument load_kernel_document(const std::filesystem::path& path);
void save_kernel_document(const KernelDocument& doc,
                          const std::filesystem::path& path);

// Indented human-readable rendering of the kernel tree.
std::string describe_kernel(const KernelSpec& spec);

}  // namespace sgp
