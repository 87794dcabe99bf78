#include "air/error.hpp"

namespace air {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Shape: return "shape";
        case ErrorCode::Domain: return "domain";
        case ErrorCode::Parameter: return "parameter";
        case ErrorCode::Unsupported: return "unsupported";
        case ErrorCode::Format: return "format";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

}  // namespace air
