use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// File stem without a leading `img_`, `gt_` or `pred_` prefix; used to pair
/// files across directories (`img_0007.png` with `gt_0007.png`).
pub fn pair_key(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for prefix in ["img_", "gt_", "pred_"] {
        if let Some(rest) = stem.strip_prefix(prefix) {
            return rest.to_string();
        }
    }
    stem
}

/// PNG files directly inside `dir`, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry.with_context(|| format!("cannot list {}", dir.display()))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// PNG files of `dir` keyed by [`pair_key`]. When some file names start with
/// `prefer`, only those are used, so a directory holding both `img_*` and
/// `gt_*` files can serve either role.
pub fn keyed_pngs(dir: &Path, prefer: &str) -> Result<BTreeMap<String, PathBuf>> {
    let all = list_pngs(dir)?;
    let starts = |p: &PathBuf| p.file_name().unwrap().to_string_lossy().starts_with(prefer);
    let any_preferred = all.iter().any(starts);
    let mut out = BTreeMap::new();
    for path in all.into_iter().filter(|p| !any_preferred || starts(p)) {
        if let Some(previous) = out.insert(pair_key(&path), path.clone()) {
            bail!("{} and {} have the same pairing key", previous.display(), path.display());
        }
    }
    Ok(out)
}

/// Input/output path pairs. A directory input maps every PNG inside it to a
/// file of the same name in the output directory, which is created.
pub fn io_pairs(input: &Path, output: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    if !input.exists() {
        bail!("input {} does not exist", input.display());
    }
    if !input.is_dir() {
        return Ok(vec![(input.to_path_buf(), output.to_path_buf())]);
    }
    fs::create_dir_all(output).with_context(|| format!("cannot create {}", output.display()))?;
    let inputs = list_pngs(input)?;
    if inputs.is_empty() {
        bail!("no PNG files in {}", input.display());
    }
    Ok(inputs
        .into_iter()
        .map(|p| {
            let out = output.join(p.file_name().unwrap());
            (p, out)
        })
        .collect())
}

/// Pairs every file under `reference` with the file of `other` that has the
/// same [`pair_key`]. Both paths are files or both are directories; the
/// prefixes select files as in [`keyed_pngs`].
pub fn matched_pairs(
    other: &Path,
    other_prefix: &str,
    reference: &Path,
    reference_prefix: &str,
) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    match (other.is_dir(), reference.is_dir()) {
        (false, false) => Ok(vec![(pair_key(reference), other.to_path_buf(), reference.to_path_buf())]),
        (true, true) => {
            let others = keyed_pngs(other, other_prefix)?;
            let refs = keyed_pngs(reference, reference_prefix)?;
            if refs.is_empty() {
                bail!("no PNG files in {}", reference.display());
            }
            refs.into_iter()
                .map(|(key, r)| match others.get(&key) {
                    Some(o) => Ok((key, o.clone(), r)),
                    None => bail!("no file in {} matches {}", other.display(), r.display()),
                })
                .collect()
        }
        _ => bail!("{} and {} must both be files or both be directories", other.display(), reference.display()),
    }
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    Ok(())
}
