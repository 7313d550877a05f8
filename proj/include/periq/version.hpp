#pragma once

namespace periq {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kQuantExportFormatVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

}  // namespace periq
