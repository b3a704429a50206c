#include "smoothsinger/dsp/waveform.hpp"

#include <cmath>
#include <string>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::dsp {

void validate(const Waveform& x) {
  if (x.samples.empty()) throw ValidationError("waveform is empty");
  if (!(x.sample_rate > 0.0)) throw ValidationError("waveform sample rate must be positive");
  for (std::size_t i = 0; i < x.samples.size(); ++i)
    if (!std::isfinite(x.samples[i]))
      throw ValidationError("waveform sample " + std::to_string(i) + " is not finite");
}

}  // namespace smoothsinger::dsp
