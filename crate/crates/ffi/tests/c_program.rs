//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "longseg.h"

int main(void) {
    LsegSegmenter *seg = NULL;
    if (lseg_segmenter_fixed(3, 40, 5, 5, &seg) != LSEG_STATUS_OK) return 1;
    LsegLabels *labels = NULL;
    if (lseg_segment(seg, "one two three four five six seven", &labels) != LSEG_STATUS_OK) return 2;
    size_t splits[8];
    size_t written = 0;
    if (lseg_labels_splits(labels, splits, 8, &written) != LSEG_STATUS_OK) return 3;
    for (size_t i = 0; i < written; i++) printf("%zu ", splits[i]);
    printf("\n");
    if (lseg_segment(NULL, "x", &labels) != LSEG_STATUS_NULL_POINTER) return 4;
    if (strlen(lseg_last_error()) == 0) return 5;
    lseg_labels_free(labels);
    lseg_segmenter_free(seg);
    return 0;
}
"#;

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().filter(|o| o.status.success()).map(|_| cc)
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    // target/<profile>/deps/<this test> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("liblongseg_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());

    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ffi-c-program");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I", include])
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0 3 6 \n");
}
