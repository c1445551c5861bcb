#include "ettwin/core/error.hpp"

namespace ettwin {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::EmptyInput: return "empty_input";
        case ErrorKind::BehindCamera: return "behind_camera";
        case ErrorKind::DegenerateSeries: return "degenerate_series";
        case ErrorKind::DegenerateCamera: return "degenerate_camera";
        case ErrorKind::KernelTooLarge: return "kernel_too_large";
        case ErrorKind::IllConditioned: return "ill_conditioned_fit";
        case ErrorKind::DegeneratePrediction: return "degenerate_prediction";
        case ErrorKind::NoPupil: return "no_pupil_found";
        case ErrorKind::ContaminatedSplit: return "contaminated_split";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace ettwin
