#pragma once

#include "patchprobe/effect.hpp"
#include "patchprobe/emulator.hpp"
#include "patchprobe/equiv.hpp"
#include "patchprobe/error.hpp"
#include "patchprobe/expr.hpp"
#include "patchprobe/liftx86.hpp"
#include "patchprobe/match.hpp"
#include "patchprobe/matcher.hpp"
#include "patchprobe/metrics.hpp"
#include "patchprobe/mir.hpp"
#include "patchprobe/patchmeta.hpp"
#include "patchprobe/pipeline.hpp"
#include "patchprobe/signature.hpp"
