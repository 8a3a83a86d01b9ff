//! Minimal canonical XML writer and an element-tree reader with
//! path-aware errors.

use quick_xml::events::Event;
use quick_xml::Reader;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError { path: path.into(), message: message.into() }
    }
}

fn escape(text: &str, attr: bool) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\n' if attr => out.push_str("&#10;"),
            '\t' if attr => out.push_str("&#9;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// Writes indented XML with attributes in call order. Output is a pure
/// function of the calls made.
#[derive(Debug, Default)]
pub struct XmlWriter {
    out: String,
    stack: Vec<&'static str>,
}

impl XmlWriter {
    pub fn new() -> Self {
        XmlWriter { out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"), stack: Vec::new() }
    }

    fn open_tag(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.out.push_str(&"  ".repeat(self.stack.len()));
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            self.out.push_str(&format!(" {k}=\"{}\"", escape(v, true)));
        }
    }

    pub fn start(&mut self, name: &'static str, attrs: &[(&str, &str)]) {
        self.open_tag(name, attrs);
        self.out.push_str(">\n");
        self.stack.push(name);
    }

    pub fn end(&mut self) {
        let name = self.stack.pop().expect("balanced end");
        self.out.push_str(&"  ".repeat(self.stack.len()));
        self.out.push_str(&format!("</{name}>\n"));
    }

    pub fn empty(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.open_tag(name, attrs);
        self.out.push_str("/>\n");
    }

    /// Leaf element with text content; empty text collapses to `<name/>`.
    pub fn leaf(&mut self, name: &str, attrs: &[(&str, &str)], text: &str) {
        if text.is_empty() {
            return self.empty(name, attrs);
        }
        self.open_tag(name, attrs);
        self.out.push('>');
        self.out.push_str(&escape(text, false));
        self.out.push_str(&format!("</{name}>\n"));
    }

    pub fn finish(self) -> String {
        assert!(self.stack.is_empty(), "unclosed elements: {:?}", self.stack);
        self.out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
    /// Location such as `/dossier/documents/document[2]`.
    pub path: String,
}

impl Element {
    pub fn err(&self, message: impl Into<String>) -> SchemaError {
        SchemaError::new(self.path.clone(), message)
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn req(&self, name: &str) -> Result<&str, SchemaError> {
        self.attr(name).ok_or_else(|| self.err(format!("missing attribute `{name}`")))
    }

    pub fn parse_attr<T: std::str::FromStr>(&self, name: &str) -> Result<T, SchemaError> {
        let v = self.req(name)?;
        v.parse().map_err(|_| self.err(format!("invalid value `{v}` for attribute `{name}`")))
    }

    pub fn opt_attr<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, SchemaError> {
        match self.attr(name) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.err(format!("invalid value `{v}` for attribute `{name}`"))),
        }
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn req_child(&self, name: &str) -> Result<&Element, SchemaError> {
        self.child(name).ok_or_else(|| self.err(format!("missing element `{name}`")))
    }

    pub fn all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// Rejects children outside `allowed` and enforces their relative order.
    pub fn expect_children(&self, allowed: &[&str]) -> Result<(), SchemaError> {
        let mut last = 0;
        for c in &self.children {
            let pos = allowed
                .iter()
                .position(|a| *a == c.name)
                .ok_or_else(|| c.err(format!("unexpected element `{}`", c.name)))?;
            if pos < last {
                return Err(c.err(format!("element `{}` out of order", c.name)));
            }
            last = pos;
        }
        Ok(())
    }

    pub fn expect_attrs(&self, allowed: &[&str]) -> Result<(), SchemaError> {
        match self.attrs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(self.err(format!("unexpected attribute `{k}`"))),
            None => Ok(()),
        }
    }
}

struct Open {
    element: Element,
    counts: std::collections::BTreeMap<String, usize>,
}

fn child_path(parent: Option<&mut Open>, name: &str) -> String {
    match parent {
        None => format!("/{name}"),
        Some(p) => {
            let n = p.counts.entry(name.to_owned()).or_default();
            *n += 1;
            format!("{}/{name}[{n}]", p.element.path)
        }
    }
}

/// Parses a document into its root element. Errors name the innermost open
/// element when the input breaks off or is malformed.
pub fn parse_tree(bytes: &[u8]) -> Result<Element, SchemaError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SchemaError::new("/", format!("invalid UTF-8: {e}")))?;
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(false);
    let mut stack: Vec<Open> = Vec::new();
    let mut root: Option<Element> = None;
    let here = |stack: &[Open]| stack.last().map_or_else(|| "/".to_owned(), |o| o.element.path.clone());
    loop {
        let event = reader.read_event().map_err(|e| SchemaError::new(here(&stack), format!("malformed XML: {e}")))?;
        match event {
            Event::Start(e) | Event::Empty(e) if root.is_some() => {
                let _ = e;
                return Err(SchemaError::new("/", "content after the root element"));
            }
            Event::Start(ref e) | Event::Empty(ref e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                let path = child_path(stack.last_mut(), &name);
                let mut attrs = Vec::new();
                for a in e.attributes() {
                    let a = a.map_err(|err| SchemaError::new(path.clone(), format!("malformed attribute: {err}")))?;
                    let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
                    let value = a
                        .unescape_value()
                        .map_err(|err| SchemaError::new(path.clone(), format!("malformed attribute: {err}")))?;
                    attrs.push((key, value.into_owned()));
                }
                let element = Element { name, attrs, children: Vec::new(), text: String::new(), path };
                if matches!(event, Event::Empty(_)) {
                    match stack.last_mut() {
                        Some(p) => p.element.children.push(element),
                        None => root = Some(element),
                    }
                } else {
                    stack.push(Open { element, counts: Default::default() });
                }
            }
            Event::End(_) => {
                let done = stack.pop().expect("reader checks end names").element;
                match stack.last_mut() {
                    Some(p) => p.element.children.push(done),
                    None => root = Some(done),
                }
            }
            Event::Text(t) => {
                let s = t.unescape().map_err(|e| SchemaError::new(here(&stack), format!("malformed text: {e}")))?;
                match stack.last_mut() {
                    Some(o) => o.element.text.push_str(&s),
                    None if s.trim().is_empty() => {}
                    None => return Err(SchemaError::new("/", "text outside the root element")),
                }
            }
            Event::CData(c) => {
                if let Some(o) = stack.last_mut() {
                    o.element.text.push_str(&String::from_utf8_lossy(&c));
                }
            }
            Event::Eof => {
                return match (stack.last(), root) {
                    (Some(open), _) => Err(SchemaError::new(open.element.path.clone(), "unexpected end of document")),
                    (None, Some(root)) => Ok(clear_mixed(root)),
                    (None, None) => Err(SchemaError::new("/", "empty document")),
                };
            }
            _ => {}
        }
    }
}

/// Drops indentation text from elements that have children.
fn clear_mixed(mut e: Element) -> Element {
    if !e.children.is_empty() && e.text.trim().is_empty() {
        e.text.clear();
    }
    e.children = e.children.into_iter().map(clear_mixed).collect();
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_parse() {
        let mut w = XmlWriter::new();
        w.start("root", &[("a", "x\"y\n")]);
        w.leaf("t", &[], " <hi> & bye ");
        w.empty("e", &[("k", "v")]);
        w.leaf("e", &[], "");
        w.end();
        let xml = w.finish();
        let root = parse_tree(xml.as_bytes()).unwrap();
        assert_eq!(root.attr("a"), Some("x\"y\n"));
        assert_eq!(root.child("t").unwrap().text, " <hi> & bye ");
        assert_eq!(root.all("e").count(), 2);
        assert_eq!(root.all("e").nth(1).unwrap().path, "/root/e[2]");
        assert!(root.text.is_empty());
    }

    #[test]
    fn truncation_names_open_path() {
        let xml = "<a><b><c>text";
        let err = parse_tree(xml.as_bytes()).unwrap_err();
        assert_eq!(err.path, "/a/b[1]/c[1]");
        let err = parse_tree(b"<a><b></c></a>").unwrap_err();
        assert_eq!(err.path, "/a/b[1]");
        assert!(parse_tree(b"").is_err());
    }

    #[test]
    fn child_order_is_enforced() {
        let root = parse_tree(b"<r><b/><a/></r>").unwrap();
        assert!(root.expect_children(&["a", "b"]).is_err());
        assert!(root.expect_children(&["b", "a"]).is_ok());
        assert_eq!(root.expect_children(&["a"]).unwrap_err().path, "/r/b[1]");
    }
}
