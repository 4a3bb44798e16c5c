#pragma once

#include "arena/attention/full.hpp"
#include "arena/attention/kernel.hpp"
#include "arena/attention/linformer.hpp"
#include "arena/attention/lsh.hpp"
#include "arena/attention/pattern.hpp"
#include "arena/attention/sinkhorn.hpp"
#include "arena/attention/spec.hpp"
#include "arena/attention/synthesizer.hpp"
