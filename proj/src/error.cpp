#include "dronedelivery/error.hpp"

namespace dd {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::Validation: return "validation";
        case ErrorCode::Capacity: return "capacity";
        case ErrorCode::UnresolvableAddress: return "unresolvable_address";
        case ErrorCode::Unavailable: return "unavailable";
        case ErrorCode::Internal: return "internal";
    }
    return "internal";
}

}  // namespace dd
