#pragma once

#include "logdrw/witt_base.hpp"
#include "logdrw/exact_homology.hpp"
#include "logdrw/drw_core.hpp"
#include "logdrw/log_semistable.hpp"
#include "logdrw/monodromy_filtration.hpp"
#include "logdrw/comparison_mw.hpp"
#include "logdrw/cli_runner.hpp"
