//! robots.txt parsing and matching.
//!
//! Rules are grouped by user agent. The group naming our agent wins over the
//! `*` group. Within a group the longest matching pattern decides, and Allow
//! beats Disallow when both match with the same length. Patterns support `*`
//! and a trailing `$`.

use log::warn;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub allow: bool,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Group {
    /// Lowercased user-agent tokens.
    pub agents: Vec<String>,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RobotsRules {
    pub groups: Vec<Group>,
}

impl RobotsRules {
    pub fn allow_all() -> Self {
        RobotsRules::default()
    }

    /// Parses a robots.txt body. Bodies that are not text or contain no
    /// directive at all are treated as allow-all with a warning.
    pub fn parse(body: &[u8]) -> Self {
        let Ok(text) = std::str::from_utf8(body) else {
            warn!("robots.txt is not valid UTF-8, allowing all");
            return RobotsRules::allow_all();
        };
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut groups: Vec<Group> = Vec::new();
        let mut current: Option<Group> = None;
        let mut in_agents = false;
        let mut directives = 0usize;
        let mut junk = 0usize;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                junk += 1;
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    directives += 1;
                    if !in_agents {
                        if let Some(g) = current.take() {
                            groups.push(g);
                        }
                        current = Some(Group::default());
                        in_agents = true;
                    }
                    if let Some(g) = current.as_mut() {
                        g.agents.push(value.to_ascii_lowercase());
                    }
                }
                "allow" | "disallow" => {
                    directives += 1;
                    in_agents = false;
                    // An empty Disallow allows everything; it adds no rule.
                    if value.is_empty() {
                        continue;
                    }
                    if let Some(g) = current.as_mut() {
                        g.rules.push(Rule {
                            allow: key == "allow",
                            pattern: value.to_string(),
                        });
                    }
                }
                _ => {
                    // Crawl-delay, Sitemap and unknown keys.
                    in_agents = false;
                }
            }
        }
        if let Some(g) = current {
            groups.push(g);
        }
        if directives == 0 && junk > 0 {
            warn!("robots.txt has no recognisable directives, allowing all");
            return RobotsRules::allow_all();
        }
        RobotsRules { groups }
    }

    fn group_for(&self, user_agent: &str) -> Option<&Group> {
        let ua = user_agent.to_ascii_lowercase();
        let product = ua.split(['/', ' ']).next().unwrap_or("");
        let specific = self.groups.iter().find(|g| {
            g.agents
                .iter()
                .any(|a| a != "*" && !a.is_empty() && (product == *a || ua.contains(a.as_str())))
        });
        specific.or_else(|| self.groups.iter().find(|g| g.agents.iter().any(|a| a == "*")))
    }
}

/// Whether `pattern` matches a prefix of `path` (all of it with `$`).
fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (pattern, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let parts: Vec<&str> = pattern.split('*').collect();
    // The first part must be a prefix, the rest appear in order.
    let Some(mut rest) = path.strip_prefix(parts[0]) else {
        return false;
    };
    if parts.len() == 1 {
        return !anchored || rest.is_empty();
    }
    for (i, part) in parts.iter().enumerate().skip(1) {
        let last = i == parts.len() - 1;
        if last && anchored {
            return rest.ends_with(part);
        }
        match rest.find(part) {
            Some(pos) => rest = &rest[pos + part.len()..],
            None => return false,
        }
    }
    true
}

/// Whether `path` (path plus query) may be fetched by `user_agent`.
pub fn robots_allowed(rules: &RobotsRules, path: &str, user_agent: &str) -> bool {
    let Some(group) = rules.group_for(user_agent) else {
        return true;
    };
    let path = if path.is_empty() { "/" } else { path };
    let mut best: Option<(usize, bool)> = None;
    for rule in &group.rules {
        if !pattern_matches(&rule.pattern, path) {
            continue;
        }
        let len = rule.pattern.len();
        best = match best {
            Some((bl, ba)) if bl > len || (bl == len && (ba || !rule.allow)) => Some((bl, ba)),
            _ => Some((len, rule.allow)),
        };
    }
    best.is_none_or(|(_, allow)| allow)
}
