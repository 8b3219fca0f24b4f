/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#ifndef STREAMOD_STREAMOD_HPP_
#define STREAMOD_STREAMOD_HPP_

#include <streamod/core.hpp>
#include <streamod/index/linear_scan.hpp>
#include <streamod/index/mtree.hpp>
#include <streamod/index/vptree.hpp>
#include <streamod/io/csv.hpp>
#include <streamod/io/gaussian.hpp>
#include <streamod/io/oracle.hpp>
#include <streamod/io/run_record.hpp>
#include <streamod/partitioner.hpp>
#include <streamod/processors/event_queue.hpp>
#include <streamod/processors/exact_storm.hpp>
#include <streamod/processors/meta_window.hpp>
#include <streamod/processors/pmcod.hpp>
#include <streamod/processors/sliced.hpp>
#include <streamod/runtime.hpp>
#include <streamod/stream.hpp>

#endif  // STREAMOD_STREAMOD_HPP_
