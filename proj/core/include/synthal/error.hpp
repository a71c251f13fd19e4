#pragma once

#include <stdexcept>
#include <string>

namespace synthal {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    Error(const std::string& name, const std::string& detail)
        : std::runtime_error(name + ": " + detail), detail_(detail) {}

    /// Message without the type prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
};

#define SYNTHAL_DEFINE_ERROR(Name)            \
    class Name : public Error {               \
    public:                                   \
        explicit Name(const std::string& what) \
            : Error(#Name, what) {}           \
    };

SYNTHAL_DEFINE_ERROR(InvalidParameter)
SYNTHAL_DEFINE_ERROR(ShapeError)
SYNTHAL_DEFINE_ERROR(DegenerateInput)
SYNTHAL_DEFINE_ERROR(GenerationFailed)
SYNTHAL_DEFINE_ERROR(NoBackgroundAvailable)
SYNTHAL_DEFINE_ERROR(InvalidStack)
SYNTHAL_DEFINE_ERROR(InvalidInput)
SYNTHAL_DEFINE_ERROR(InsufficientPool)
SYNTHAL_DEFINE_ERROR(DatasetError)
SYNTHAL_DEFINE_ERROR(TrainerError)
SYNTHAL_DEFINE_ERROR(FormatError)
SYNTHAL_DEFINE_ERROR(ConfigError)
SYNTHAL_DEFINE_ERROR(LabelLeak)

#undef SYNTHAL_DEFINE_ERROR

}  // namespace synthal
