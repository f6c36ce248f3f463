//! URL glob matching for rule sites and routine `url_glob`s.

/// Matches `text` against a glob where `*` matches any run of characters
/// (including `/`) and `?` matches exactly one character.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: alloc::vec::Vec<char> = pattern.chars().collect();
    let t: alloc::vec::Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut star: Option<usize> = None;
    let mut resume = 0usize;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            resume = ti;
            pi += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            resume += 1;
            ti = resume;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}

/// Path component of a URL: `https://host/a/b?q` → `/a/b?q`. Bare paths are
/// returned unchanged.
pub fn url_path(url: &str) -> &str {
    match url.find("://") {
        Some(i) => {
            let rest = &url[i + 3..];
            match rest.find('/') {
                Some(j) => &rest[j..],
                None => "/",
            }
        }
        None => url,
    }
}

/// A glob matches a URL when it matches either the full URL or its path.
pub fn url_matches(pattern: &str, url: &str) -> bool {
    glob_match(pattern, url) || glob_match(pattern, url_path(url))
}
