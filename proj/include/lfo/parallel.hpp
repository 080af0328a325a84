#pragma once

namespace lfo::par {

// Global execution mode. Reference mode forces every kernel onto its serial
// path; it is what `--reference` selects for bit-reproducible runs. The
// worker count honors the LFO_THREADS environment variable.
void set_reference(bool on);
bool reference();

void set_threads(int n);  // 0 = auto (LFO_THREADS or hardware)
int threads();            // effective worker count (1 in reference mode)

// Chunk width for ordered gradient reductions. Partial sums are produced per
// fixed-size chunk and combined in chunk order, so results do not depend on
// the number of threads.
inline constexpr int kReduceChunk = 16;

}  // namespace lfo::par
