#pragma once

#include "mtra/core.hpp"
#include "mtra/io.hpp"
#include "mtra/manip.hpp"
#include "mtra/mechanisms.hpp"
#include "mtra/prefs.hpp"
#include "mtra/verify.hpp"
