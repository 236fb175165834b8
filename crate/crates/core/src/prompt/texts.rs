//! Fixed prompt texts. Changing any of these changes every prompt
//! fingerprint and invalidates recorded completions.

pub const PREAMBLE: &str = "\
Checked C has three checked pointer types that support the following annotations:

  ptr<T>     A pointer to a single value of type T. It is never used for
             pointer arithmetic or indexing, and it never carries bounds.
  arr<T>     A pointer into an array of T. Every arr<T> declaration carries a
             bounds annotation that describes the memory it may access.
  nt_arr<T>  A pointer into a null-terminated array of T, typically a string.
             Its bounds describe the elements known to be readable before the
             terminating null value.

A bounds annotation follows the declared name after a colon:

  arr<T> p : count(e)        p may access p[0] .. p[e - 1]
  arr<T> p : byte_count(e)   p may access e bytes starting at p
  arr<T> p : bounds(lo, hi)  p may access addresses in [lo, hi)
  nt_arr<T> s : count(e)     s has at least e + 1 elements, the last being
                             the null value; s[0] .. s[e - 1] are readable

Annotations apply to parameters, locals, globals, struct fields and return
values. A function returning an annotated pointer places the annotation after
its parameter list:

  nt_arr<char> name(arr<char> buf : count(n), int n) : count(0) { ... }

Bounds expressions are built from integer literals, variables and the
operators + - * / with parentheses. Function calls are not allowed. Every
variable used in a bounds expression must be in scope at the declaration:
a parameter of the same function, a local declared earlier, a global, a macro
or, for struct fields, another field of the same struct.

The compiler inserts a null check at every dereference of a checked pointer
and a bounds check at every access through arr and nt_arr. The bounds of an
nt_arr may be widened while the value at the current upper bound is not null,
so `while (*s != 0) s++;` is a valid way to walk an nt_arr<char> s : count(0).

A nested type such as arr<arr<T>> cannot be annotated: the inner arrays have
no place to store their individual lengths.

When a checked array is converted to nt_arr, the count is one less than the
number of elements, because the last element is the null terminator.
";

pub const REFACTOR_INSTRUCTION: &str = "\
Similar changes have been made in other parts of the code. Given the refactor
history, update the current code accordingly.";

pub const OUTPUT_FORMAT: &str = "\
Each change must be output as a block with original lines and refactored
lines in the format below. Output a series of such blocks, one for every change.

<<<<ORIGINAL
<one or more consecutive lines copied exactly from the code>
====
>>>>REFACTORED
<the lines that replace them>
<<<<END

Copy original lines exactly, including their order; whitespace at the start and
end of a line is ignored when matching. To insert new lines, include an
existing neighbouring line in both parts. Lines that do not change must not be
output. Text outside of blocks is treated as commentary. If nothing needs to
change, output no blocks.";

pub const EXAMPLE_INTRO: &str = "Consider this example input and output as a reference.";
pub const PRELUDE_INTRO: &str = "Here is relevant context for the given code";
pub const CODE_INTRO: &str = "This is the code that must be transformed";
pub const HISTORY_INTRO: &str = "This is a history of the previous changes";
pub const ELEMENTS_INTRO: &str = "Perform the given task on these parts of the code:";

pub const NESTED_ARRAYS_DESCRIPTION: &str = "\
You are given a list of Checked C declarations and a partially converted Checked C code
snippet. Array of arr<T> is not supported in Checked C. Your task is to replace them
with an array of struct having a pointer field 'ptr' and a bounds field 'len'. You will
also have to replace the uses of the nested array with the uses of the struct 'ptr' field
instead. Make sure to update the 'len' field whenever the 'ptr' field is updated.";

pub const NESTED_ARRAYS_EXAMPLE: &str = "\
From:
int foo(arr<arr<int>> a, int i) {
  return a[i][i];
}
To:
// New struct
typedef struct arr_of_int {
  arr<int> ptr : count(len);
  int len;
} arr_of_int;
// type of a changes
int foo(arr<struct arr_of_int> a, int i) {
  // nested pointer access via the ptr field
  return a[i].ptr[i];
}";

pub const BOUNDS_DESCRIPTION: &str = "\
Determine and assign 'count(..)' or 'bounds(.., ..)' expressions for each arr and nt_arr in
the given function. To find valid bounds for a pointer p, examine all uses of p and set
bounds that encompass every access. Alternatively, adopt the bounds from the pointer from
which p was assigned.

You will be provided a list of pointer variable names along with their declaration line
number. You must choose one of the following rules for each of them.

[A0] Infer a valid bounds expression:
    Provide a 'count(..)' or 'bounds(..,..)' expression at the line of declaration. Choose
    this only when you are completely sure that the bounds are valid.

[A1] Say unknown:
    When there is not enough information to infer bounds for a pointer, it is okay to leave
    the annotated line same as the original line. Follow this by explaining why enough
    information is not available. This can be chosen when there is not a clear upper bound
    to all accesses through the pointer or the pointer depends on other pointers whose
    bounds are not known.

[A2] Change an arr to nt_arr:
    If you cannot infer the bounds to arr p but you do know that p is terminated with a
    null character from its use, you can change its type to nt_arr. Make sure to also
    change the pointers that p was derived from to nt_arr in such a case. This can also
    be due to a callee now taking nt_arr instead of arr due to an earlier refactor.

[A3] Add a parameter for bounds:
    If you cannot infer a reasonable bound for a pointer parameter, add a new parameter to
    store its bounds and use that in the bounds expression. Going ahead, all calls of this
    function will have to be passed this extra bounds argument.";

pub const BOUNDS_EXAMPLE: &str = "\
From:
struct x { int f; int g; }
int foo(arr<struct x> a, int i) {
  int j = a[i].f;
  arr<struct x> p = a;
  return a[j].f;
}
To:
// [A3] As j is read from the heap, the access
// a[j] could be anything. Moreover, j is not
// in scope at line 1. Since 'a' is a pointer
// parameter, add a bounds parameter instead
// of saying 'unknown'.
int foo(arr<struct x> a : count(count_for_a),
  int count_for_a, int i) {
  int j = a[i].f;
  // [A0] As p is assigned a, the bounds for a
  // are valid for p too.
  arr<struct x> p : count(count_for_a) = a;
  return a[j].f;
}

From:
void foo() {
  char a[10]; nt_arr<char> p = a;
}
To:
void foo() {
  char a[10];
  // [A0] When an array is converted to nt_arr
  // the count is the size of the array - 1.
  nt_arr<char> p : count(9) = a;
}";

pub const GLOBALS_FIELDS_DESCRIPTION: &str = "\
You are given a Checked C code snippet, with a history of refactors. The refactors
introduce a new variable to store the bounds of a pointer variable, which can be a
struct field or a global variable. Update the newly introduced bounds variable with
the correct bounds whenever its corresponding pointer variable is assigned a new
value. Make the update in the same statement as the assignment.";

pub const GLOBALS_FIELDS_EXAMPLE: &str = "\
From:
void foo(arr<struct x> a, int i) {
  a[i].p = malloc(sizeof(int) * 10);
}

To:
struct x {
  int count_for_p;
  arr<int> p: count(count_for_p);
}

void foo(arr<struct x> a, int i){
  a[i].p = malloc(sizeof(int) * 10),
  a[i].count_for_p = 10;
}";
