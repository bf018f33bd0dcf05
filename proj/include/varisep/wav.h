// include/varisep/wav.h


// Copyright 2026  The varisep Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef VARISEP_WAV_H_
#define VARISEP_WAV_H_

#include <string>

#include "varisep/signal.h"

namespace varisep {

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a mono RIFF/WAVE file. PCM16 samples are divided by 32768;
/// float32 samples are widened to double unchanged. WAVE_FORMAT_EXTENSIBLE
/// headers are accepted when their subformat is one of the two.
Signal read_wav(const std::string &path);

/// Writes a mono RIFF/WAVE file. PCM16 clamps to [-1, 32767/32768] and
/// rounds half away from zero; float32 rounds each sample to nearest float.
void write_wav(const std::string &path, const Signal &s,
               WavEncoding encoding = WavEncoding::kFloat32);

/// The PCM16 code write_wav stores for amplitude x.
int QuantizePcm16(double x);

}  // namespace varisep

#endif  // VARISEP_WAV_H_
