#pragma once

namespace partfuse {

/// Keeps freed heap memory in the process (glibc only; no-op elsewhere).
/// Training allocates and frees the same large buffers every iteration, and
/// returning them to the OS costs a page fault per 4 KiB on the next touch.
void retain_freed_memory();

}  // namespace partfuse
